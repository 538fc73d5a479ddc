// Incremental NDJSON decoding. The frame stream arrives as arbitrary byte
// chunks; lines may split anywhere, including inside a UTF-8 sequence, so
// the splitter owns a carry buffer and the decoder runs in streaming mode.

export class LineSplitter {
  private carry = "";

  // Returns the complete lines contained in `chunk` plus any carried text.
  push(chunk: string): string[] {
    this.carry += chunk;
    const lines: string[] = [];
    let at = 0;
    for (;;) {
      const nl = this.carry.indexOf("\n", at);
      if (nl < 0) break;
      let line = this.carry.slice(at, nl);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      lines.push(line);
      at = nl + 1;
    }
    this.carry = this.carry.slice(at);
    return lines;
  }

  // Final partial line, if the stream ended without a trailing newline.
  flush(): string[] {
    const rest = this.carry;
    this.carry = "";
    return rest.length > 0 ? [rest] : [];
  }
}

export async function* ndjsonLines(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<string> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  const splitter = new LineSplitter();
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const line of splitter.push(decoder.decode(value, { stream: true }))) {
        if (line.trim().length > 0) yield line;
      }
    }
    for (const line of splitter.push(decoder.decode())) {
      if (line.trim().length > 0) yield line;
    }
    for (const line of splitter.flush()) {
      if (line.trim().length > 0) yield line;
    }
  } finally {
    reader.releaseLock();
  }
}

export async function* ndjsonObjects<T>(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<T> {
  for await (const line of ndjsonLines(body)) {
    yield JSON.parse(line) as T;
  }
}
