// Client-side waveform sampling for the visualizer pane. This mirrors the
// renderer the device pipeline uses, so the curve on screen is the curve
// the compiler sees: same shapes, same envelope kinds, same combinators,
// same sample-budget split, same clipping.

import type {
  CombinatorNode,
  EnvelopeNode,
  OscillatorNode,
  WaveformNode,
} from "./types.js";

// Linear interpolation with edge clamping over ascending xs.
function interp(x: number, xs: number[], ys: number[]): number {
  const n = xs.length;
  if (n === 0) return 0;
  if (x <= xs[0]) return ys[0];
  if (x >= xs[n - 1]) return ys[n - 1];
  let i = 1;
  while (i < n && xs[i] < x) i++;
  const span = xs[i] - xs[i - 1];
  if (span === 0) return ys[i];
  const w = (x - xs[i - 1]) / span;
  return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

function positiveMod(x: number, m: number): number {
  const r = x % m;
  return r < 0 ? r + m : r;
}

function oscillatorSamples(
  node: OscillatorNode,
  rateHz: number,
  n: number,
): Float64Array {
  const out = new Float64Array(n);
  const dt = 1.0 / rateHz;
  const phase = new Float64Array(n);
  if (typeof node.freq_hz === "number") {
    const f = node.freq_hz;
    for (let i = 0; i < n; i++) {
      phase[i] = node.phase + 2 * Math.PI * f * (i * dt);
    }
  } else {
    // sweep: integrate the instantaneous frequency
    const xs = node.freq_hz.map((kf) => kf[0] / 1000.0);
    const ys = node.freq_hz.map((kf) => kf[1]);
    let acc = 0;
    for (let i = 0; i < n; i++) {
      phase[i] = node.phase + 2 * Math.PI * acc;
      acc += interp(i * dt, xs, ys) * dt;
    }
  }
  for (let i = 0; i < n; i++) {
    const p = phase[i];
    let v: number;
    switch (node.shape) {
      case "SINE":
        v = Math.sin(p);
        break;
      case "SQUARE":
        v = Math.sin(p) >= 0 ? 1.0 : -1.0;
        break;
      case "TRIANGLE":
        v = (2 / Math.PI) * Math.asin(Math.sin(p));
        break;
      case "SAW":
        v = 2 * positiveMod(p / (2 * Math.PI), 1.0) - 1;
        break;
    }
    out[i] = node.amplitude * v;
  }
  return out;
}

function envelopeSamples(
  node: EnvelopeNode,
  rateHz: number,
  n: number,
): Float64Array {
  const out = new Float64Array(n);
  const durationS = n / rateHz;
  if (node.kind === "RAMP") {
    if (n <= 1) {
      out.fill(1.0);
      return out;
    }
    for (let i = 0; i < n; i++) out[i] = i / rateHz / durationS;
    return out;
  }
  if (node.kind === "COS2") {
    for (let i = 0; i < n; i++) {
      const s = Math.sin((Math.PI * (i / rateHz)) / durationS);
      out[i] = s * s;
    }
    return out;
  }
  const kfs = node.keyframes ?? [];
  const xs = kfs.map((kf) => kf[0] / 1000.0);
  const ys = kfs.map((kf) => kf[1]);
  for (let i = 0; i < n; i++) out[i] = interp(i / rateHz, xs, ys);
  return out;
}

function render(node: WaveformNode, rateHz: number, n: number): Float64Array {
  if (node.type === "oscillator") return oscillatorSamples(node, rateHz, n);
  if (node.type === "envelope") return envelopeSamples(node, rateHz, n);
  if (node.op === "MULTIPLY") {
    const out = new Float64Array(n).fill(1.0);
    for (const child of node.children) {
      const part = render(child, rateHz, n);
      for (let i = 0; i < n; i++) out[i] *= part[i];
    }
    return out;
  }
  // CONCAT: children split the sample budget as evenly as possible
  const k = node.children.length;
  const base = Math.floor(n / k);
  const extra = n - base * k;
  const out = new Float64Array(n);
  let at = 0;
  for (let i = 0; i < k; i++) {
    const childN = base + (i < extra ? 1 : 0);
    out.set(render(node.children[i], rateHz, childN), at);
    at += childN;
  }
  return out;
}

export function maxOscillatorFreq(node: WaveformNode): number {
  if (node.type === "oscillator") {
    if (typeof node.freq_hz === "number") return node.freq_hz;
    let top = 0;
    for (const kf of node.freq_hz) top = Math.max(top, kf[1]);
    return top;
  }
  if (node.type === "combinator") {
    let top = 0;
    for (const child of node.children) {
      top = Math.max(top, maxOscillatorFreq(child));
    }
    return top;
  }
  return 0;
}

export function sampleNode(
  node: WaveformNode,
  rateHz: number,
  durationMs: number,
): Float64Array {
  if (rateHz <= 0) throw new Error("sample rate must be positive");
  if (durationMs <= 0) throw new Error("duration must be positive");
  const n = Math.round((durationMs / 1000.0) * rateHz);
  const out = render(node, rateHz, n);
  for (let i = 0; i < n; i++) {
    out[i] = Math.min(1.0, Math.max(-1.0, out[i]));
  }
  return out;
}

// Visualizer sampling picks a rate the content allows; the canvas only
// needs a few hundred points, but aliasing a 300 Hz carrier into a fake
// slow wave would mislead, so stay above Nyquist with headroom.
export function displayRate(node: WaveformNode, points = 1024): number {
  return Math.max(2000, 4 * maxOscillatorFreq(node), points);
}

// Dropping a template onto an occupied visualizer multiplies the two
// waveforms; onto an empty visualizer it just adopts the template.
export function multiplyCompose(
  current: WaveformNode | null,
  template: WaveformNode,
): WaveformNode {
  if (current === null) return template;
  const combined: CombinatorNode = {
    type: "combinator",
    op: "MULTIPLY",
    children: [current, template],
  };
  return combined;
}

// Parse user-pasted keyframe JSON into an envelope node. Accepts either a
// bare [[t_ms, value], ...] array or a full envelope node object.
export function importKeyframes(text: string): EnvelopeNode {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    throw new Error("keyframe import: not valid JSON");
  }
  let pairs: unknown;
  if (Array.isArray(parsed)) {
    pairs = parsed;
  } else if (
    typeof parsed === "object" &&
    parsed !== null &&
    (parsed as { type?: unknown }).type === "envelope"
  ) {
    pairs = (parsed as { keyframes?: unknown }).keyframes;
  } else {
    throw new Error("keyframe import: expected a keyframe array or envelope");
  }
  if (!Array.isArray(pairs) || pairs.length === 0) {
    throw new Error("keyframe import: need at least one [t_ms, value] pair");
  }
  const keyframes: [number, number][] = [];
  let lastT = -Infinity;
  for (const item of pairs) {
    if (
      !Array.isArray(item) ||
      item.length !== 2 ||
      typeof item[0] !== "number" ||
      typeof item[1] !== "number"
    ) {
      throw new Error("keyframe import: each entry must be [t_ms, value]");
    }
    const [t, v] = item as [number, number];
    if (!(t >= lastT)) {
      throw new Error("keyframe import: times must be non-decreasing");
    }
    if (v < 0 || v > 1) {
      throw new Error("keyframe import: values must be 0..1, got " + v);
    }
    lastT = t;
    keyframes.push([t, v]);
  }
  return { type: "envelope", kind: "KEYFRAMES", keyframes };
}
