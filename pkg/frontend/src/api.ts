// HTTP client for the pattern service. The editor talks to the service
// only through the ServiceApi interface so tests can swap in a fake.

import { ndjsonObjects } from "./ndjson.js";
import type {
  CompileResponse,
  Frame,
  PatternDoc,
  PatternResource,
  PlayResponse,
  ScrubResponse,
  SessionStatus,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(detail);
    this.name = "ServiceError";
  }
}

export interface ServiceApi {
  createPattern(doc: PatternDoc): Promise<PatternResource>;
  getPattern(id: string): Promise<PatternResource>;
  updatePattern(
    id: string,
    doc: PatternDoc,
    expectedRevision: number,
  ): Promise<PatternResource>;
  deletePattern(id: string): Promise<void>;
  compile(id: string): Promise<CompileResponse>;
  play(id: string, fromMs: number): Promise<PlayResponse>;
  stop(id: string): Promise<SessionStatus>;
  scrub(id: string, tMs: number): Promise<ScrubResponse>;
  frames(id: string): AsyncIterable<Frame>;
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ServiceClient implements ServiceApi {
  private fetchFn: FetchLike;

  constructor(
    private base = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) throw await toServiceError(resp);
    return (await resp.json()) as T;
  }

  createPattern(doc: PatternDoc) {
    return this.request<PatternResource>("POST", "/patterns", {
      document: doc,
    });
  }

  getPattern(id: string) {
    return this.request<PatternResource>("GET", "/patterns/" + id);
  }

  updatePattern(id: string, doc: PatternDoc, expectedRevision: number) {
    return this.request<PatternResource>("PUT", "/patterns/" + id, {
      document: doc,
      expected_revision: expectedRevision,
    });
  }

  async deletePattern(id: string) {
    await this.request<unknown>("DELETE", "/patterns/" + id);
  }

  compile(id: string) {
    return this.request<CompileResponse>(
      "POST",
      "/patterns/" + id + "/compile",
    );
  }

  play(id: string, fromMs: number) {
    return this.request<PlayResponse>("POST", "/sessions/" + id + "/play", {
      from_ms: fromMs,
    });
  }

  stop(id: string) {
    return this.request<SessionStatus>("POST", "/sessions/" + id + "/stop");
  }

  scrub(id: string, tMs: number) {
    return this.request<ScrubResponse>("POST", "/sessions/" + id + "/scrub", {
      t_ms: tMs,
    });
  }

  async *frames(id: string): AsyncIterable<Frame> {
    const resp = await this.fetchFn(
      this.base + "/sessions/" + id + "/frames?pace=realtime",
      { method: "GET" },
    );
    if (!resp.ok) throw await toServiceError(resp);
    if (!resp.body) throw new ServiceError(502, "frame stream has no body");
    yield* ndjsonObjects<Frame>(resp.body);
  }
}

async function toServiceError(resp: Response): Promise<ServiceError> {
  let detail = resp.statusText || "request failed";
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body, keep the status text
  }
  return new ServiceError(resp.status, detail);
}
