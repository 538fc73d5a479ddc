// Editor state. One store drives all four panes. Every document change
// goes through the service and the local copy is replaced by the server's
// canonical response, so what the editor shows is always what a reload
// would show.

import type { ServiceApi } from "./api.js";
import { ServiceError } from "./api.js";
import type {
  AssignmentSpan,
  Frame,
  PatternDoc,
  UnitKey,
  WaveformNode,
} from "./types.js";
import {
  MAX_CHAINS,
  MAX_CHAIN_LENGTH,
  cloneDoc,
  emptyDocument,
  patternDuration,
  unitKeyString,
} from "./types.js";
import { importKeyframes, multiplyCompose } from "./waveform.js";

export type PlayState = "IDLE" | "PLAYING" | "STOPPED";

export interface FieldMessage {
  field: string;
  message: string;
}

// Default canvas placement: units in a row per chain, chains stacked, so
// repeated "create chain" clicks build a readable grid.
const UNIT_SPACING_X = 40;
const CHAIN_SPACING_Y = 60;
const GRID_MARGIN_X = 20;
const GRID_MARGIN_Y = 30;

export class EditorStore {
  doc: PatternDoc = emptyDocument();
  patternId: string | null = null;
  revision = 0;

  selected: UnitKey | null = null;
  // waveform shown in the visualizer; openWaveformId ties it to a library
  // entry so composing writes back through the service
  visualWaveform: WaveformNode | null = null;
  openWaveformId: string | null = null;

  highlights = new Set<string>();
  cursorMs = 0;
  playState: PlayState = "IDLE";
  lastFrame: Frame | null = null;
  frameLog: Frame[] = [];

  banner: string | null = null;
  fieldMessage: FieldMessage | null = null;

  private listeners: (() => void)[] = [];

  constructor(private service: ServiceApi) {}

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit() {
    for (const fn of this.listeners) fn();
  }

  durationMs(): number {
    return patternDuration(this.doc);
  }

  async newPattern(): Promise<void> {
    const res = await this.service.createPattern(emptyDocument());
    this.patternId = res.id;
    this.revision = res.revision;
    this.doc = res.document;
    this.selected = null;
    this.visualWaveform = null;
    this.openWaveformId = null;
    this.highlights.clear();
    this.cursorMs = 0;
    this.playState = "IDLE";
    this.lastFrame = null;
    this.frameLog = [];
    this.banner = null;
    this.fieldMessage = null;
    this.emit();
  }

  async load(id: string): Promise<void> {
    const res = await this.service.getPattern(id);
    this.patternId = res.id;
    this.revision = res.revision;
    this.doc = res.document;
    this.emit();
  }

  // Push an edited document to the service. On success the store adopts
  // the canonical copy; on rejection the previous document stays in place
  // and the message lands on the pane that caused it.
  private async commit(next: PatternDoc, field: string): Promise<boolean> {
    if (this.patternId === null) {
      this.fieldMessage = { field, message: "no pattern loaded" };
      this.emit();
      return false;
    }
    try {
      const res = await this.service.updatePattern(
        this.patternId,
        next,
        this.revision,
      );
      this.doc = res.document;
      this.revision = res.revision;
      this.fieldMessage = null;
      this.emit();
      return true;
    } catch (err) {
      if (err instanceof ServiceError && err.status === 409) {
        this.banner = "pattern changed elsewhere; reloaded latest";
        await this.load(this.patternId);
        return false;
      }
      const message = err instanceof Error ? err.message : String(err);
      this.fieldMessage = { field, message };
      this.emit();
      return false;
    }
  }

  async addChain(length: number): Promise<boolean> {
    if (this.doc.chains.length >= MAX_CHAINS) {
      this.fieldMessage = {
        field: "chains",
        message: "a pattern holds at most " + MAX_CHAINS + " chains",
      };
      this.emit();
      return false;
    }
    if (length < 1 || length > MAX_CHAIN_LENGTH) {
      this.fieldMessage = {
        field: "chains",
        message: "a chain holds 1.." + MAX_CHAIN_LENGTH + " units",
      };
      this.emit();
      return false;
    }
    const next = cloneDoc(this.doc);
    const row = next.chains.length;
    const units = [];
    for (let addr = 0; addr < length; addr++) {
      units.push({
        address: addr,
        x: GRID_MARGIN_X + addr * UNIT_SPACING_X,
        y: GRID_MARGIN_Y + row * CHAIN_SPACING_Y,
      });
    }
    next.chains.push(units);
    return this.commit(next, "chains");
  }

  async moveUnit(
    chain: number,
    addr: number,
    x: number,
    y: number,
  ): Promise<boolean> {
    const next = cloneDoc(this.doc);
    const unit = next.chains[chain]?.find((u) => u.address === addr);
    if (!unit) {
      this.fieldMessage = { field: "canvas", message: "no such unit" };
      this.emit();
      return false;
    }
    unit.x = x;
    unit.y = y;
    return this.commit(next, "canvas");
  }

  // Selection is view state; it loads the unit's waveform (first
  // assignment by start time) into the visualizer without a service call.
  selectUnit(chain: number, addr: number): void {
    this.selected = { chain, addr };
    const spans = this.doc.assignments
      .filter((a) => a.chain === chain && a.address === addr)
      .sort((a, b) => a.t_start_ms - b.t_start_ms);
    if (spans.length > 0) {
      this.openWaveformId = spans[0].waveform;
      this.visualWaveform = this.doc.waveforms[spans[0].waveform] ?? null;
    } else {
      this.openWaveformId = null;
      this.visualWaveform = null;
    }
    this.emit();
  }

  async setWaveform(id: string, node: WaveformNode): Promise<boolean> {
    const next = cloneDoc(this.doc);
    next.waveforms[id] = node;
    return this.commit(next, "library");
  }

  async addAssignment(span: AssignmentSpan): Promise<boolean> {
    const next = cloneDoc(this.doc);
    next.assignments.push(span);
    return this.commit(next, "timeline");
  }

  async removeAssignment(index: number): Promise<boolean> {
    const next = cloneDoc(this.doc);
    if (index < 0 || index >= next.assignments.length) return false;
    next.assignments.splice(index, 1);
    return this.commit(next, "timeline");
  }

  // Dropping a template onto the visualizer. Empty visualizer adopts the
  // template; otherwise the template multiplies the current waveform.
  // When a library entry is open the result writes back to it.
  async composeTemplate(template: WaveformNode): Promise<boolean> {
    const composed = multiplyCompose(this.visualWaveform, template);
    this.visualWaveform = composed;
    if (this.openWaveformId !== null && this.patternId !== null) {
      return this.setWaveform(this.openWaveformId, composed);
    }
    this.emit();
    return true;
  }

  async importKeyframeJson(name: string, text: string): Promise<boolean> {
    let node: WaveformNode;
    try {
      node = importKeyframes(text);
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.fieldMessage = { field: "library", message };
      this.emit();
      return false;
    }
    const ok = await this.setWaveform(name, node);
    if (ok) {
      this.openWaveformId = name;
      this.visualWaveform = node;
      this.emit();
    }
    return ok;
  }

  // Timeline scrub. Out-of-range times clamp to the pattern, then the
  // service decides which units are active; the highlight set is exactly
  // its answer.
  async scrub(tMs: number): Promise<void> {
    if (this.patternId === null) return;
    const clamped = Math.min(Math.max(tMs, 0), this.durationMs());
    try {
      const res = await this.service.scrub(this.patternId, clamped);
      this.cursorMs = res.t_ms;
      this.highlights = new Set(
        res.units.map((u) => unitKeyString(u.chain, u.addr)),
      );
    } catch (err) {
      this.banner = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  // Start playback and consume the frame stream to the end. The UI calls
  // this without awaiting; tests await it to observe the full log.
  async play(fromMs = 0): Promise<void> {
    if (this.patternId === null || this.playState === "PLAYING") return;
    try {
      await this.service.play(this.patternId, fromMs);
    } catch (err) {
      this.banner = err instanceof Error ? err.message : String(err);
      this.emit();
      return;
    }
    this.playState = "PLAYING";
    this.frameLog = [];
    this.lastFrame = null;
    this.banner = null;
    this.emit();
    try {
      for await (const frame of this.service.frames(this.patternId)) {
        this.lastFrame = frame;
        this.frameLog.push(frame);
        this.cursorMs = frame.t_ms;
        this.emit();
      }
    } catch (err) {
      // broken stream: tell the user and quench anything still running
      this.banner =
        "frame stream disconnected: " +
        (err instanceof Error ? err.message : String(err));
      try {
        await this.service.stop(this.patternId);
      } catch {
        // the stop is best-effort; the banner already reports the outage
      }
    } finally {
      this.playState = "STOPPED";
      this.emit();
    }
  }

  async stop(): Promise<void> {
    if (this.patternId === null) return;
    try {
      await this.service.stop(this.patternId);
    } catch (err) {
      this.banner = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  clearBanner(): void {
    this.banner = null;
    this.emit();
  }
}
