import { describe, expect, it } from "vitest";

import type {
  CombinatorNode,
  EnvelopeNode,
  OscillatorNode,
  WaveformNode,
} from "../src/types.js";
import {
  importKeyframes,
  maxOscillatorFreq,
  multiplyCompose,
  sampleNode,
} from "../src/waveform.js";

function osc(
  freq: number | [number, number][],
  shape: OscillatorNode["shape"] = "SINE",
  amplitude = 1.0,
): OscillatorNode {
  return { type: "oscillator", shape, freq_hz: freq, amplitude, phase: 0.0 };
}

function pearson(a: number[], b: number[]): number {
  const n = a.length;
  const ma = a.reduce((s, v) => s + v, 0) / n;
  const mb = b.reduce((s, v) => s + v, 0) / n;
  let num = 0;
  let da = 0;
  let db = 0;
  for (let i = 0; i < n; i++) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) ** 2;
    db += (b[i] - mb) ** 2;
  }
  return num / Math.sqrt(da * db);
}

// peak-tracking envelope over a sliding window, long enough to bridge
// carrier periods but short against the modulation
function slidingMax(samples: Float64Array, window: number): number[] {
  const out: number[] = [];
  for (let i = 0; i < samples.length; i++) {
    let m = 0;
    const lo = Math.max(0, i - window);
    for (let j = lo; j <= i; j++) m = Math.max(m, Math.abs(samples[j]));
    out.push(m);
  }
  return out;
}

describe("sampleNode oscillators", () => {
  it("renders a sine matching the closed form", () => {
    const s = sampleNode(osc(8), 1000, 1000);
    expect(s.length).toBe(1000);
    for (let i = 0; i < s.length; i += 37) {
      expect(s[i]).toBeCloseTo(Math.sin(2 * Math.PI * 8 * (i / 1000)), 9);
    }
    const peak = Math.max(...s);
    expect(peak).toBeGreaterThan(0.99);
    expect(peak).toBeLessThanOrEqual(1.0);
  });

  it("renders a square as only +amplitude and -amplitude", () => {
    const s = sampleNode(osc(50, "SQUARE", 1.0), 2000, 100);
    for (const v of s) expect(Math.abs(v)).toBe(1.0);
    expect(s[0]).toBe(1.0);
  });

  it("renders a triangle bounded by the amplitude with linear flanks", () => {
    const s = sampleNode(osc(10, "TRIANGLE"), 4000, 100);
    expect(Math.max(...s)).toBeLessThanOrEqual(1.0);
    expect(Math.min(...s)).toBeGreaterThanOrEqual(-1.0);
    // first quarter period rises linearly: value at t is 4*f*t
    const i = 40;
    expect(s[i]).toBeCloseTo((4 * 10 * i) / 4000, 5);
  });

  it("renders a saw that ramps and wraps", () => {
    const s = sampleNode(osc(10, "SAW"), 1000, 200);
    expect(s[0]).toBeCloseTo(-1.0, 8);
    expect(s[49]).toBeCloseTo(2 * (49 / 100) - 1, 8);
    // rising within a period, dropping across the wrap near i=100
    for (let i = 0; i < 95; i++) expect(s[i + 1]).toBeGreaterThan(s[i]);
    expect(s[105]).toBeLessThan(s[95]);
    expect(s[105]).toBeCloseTo(2 * (5 / 100) - 1, 6);
  });

  it("clips to [-1, 1] when the amplitude exceeds 1", () => {
    const s = sampleNode(osc(5, "SINE", 3.0), 1000, 1000);
    expect(Math.max(...s)).toBe(1.0);
    expect(Math.min(...s)).toBe(-1.0);
    let clipped = 0;
    for (const v of s) if (Math.abs(v) === 1.0) clipped++;
    expect(clipped).toBeGreaterThan(s.length / 2);
  });

  it("sweeps frequency by integrating the instantaneous rate", () => {
    // 10 -> 30 Hz over 1 s: average 20 Hz, so 40 zero crossings
    const sweep = osc([
      [0, 10],
      [1000, 30],
    ]);
    const s = sampleNode(sweep, 4000, 1000);
    let crossings = 0;
    for (let i = 1; i < s.length; i++) {
      if ((s[i - 1] < 0 && s[i] >= 0) || (s[i - 1] >= 0 && s[i] < 0)) {
        crossings++;
      }
    }
    expect(Math.abs(crossings - 40)).toBeLessThanOrEqual(1);
  });
});

describe("sampleNode envelopes", () => {
  it("RAMP rises linearly from 0 toward 1", () => {
    const node: EnvelopeNode = { type: "envelope", kind: "RAMP" };
    const s = sampleNode(node, 1000, 500);
    expect(s[0]).toBe(0);
    expect(s[250]).toBeCloseTo(0.5, 6);
    expect(s[499]).toBeCloseTo(499 / 500, 6);
  });

  it("COS2 starts and ends at zero with the peak in the middle", () => {
    const node: EnvelopeNode = { type: "envelope", kind: "COS2" };
    const s = sampleNode(node, 1000, 1000);
    expect(s[0]).toBeCloseTo(0, 8);
    expect(s[500]).toBeCloseTo(1, 4);
    expect(s[s.length - 1]).toBeCloseTo(0, 2);
  });

  it("KEYFRAMES interpolates linearly and clamps at the edges", () => {
    const node: EnvelopeNode = {
      type: "envelope",
      kind: "KEYFRAMES",
      keyframes: [
        [100, 0.0],
        [300, 1.0],
        [500, 0.5],
      ],
    };
    const s = sampleNode(node, 1000, 600);
    expect(s[0]).toBe(0.0); // before first keyframe: clamp
    expect(s[200]).toBeCloseTo(0.5, 6);
    expect(s[300]).toBeCloseTo(1.0, 6);
    expect(s[599]).toBeCloseTo(0.5, 6); // after last keyframe: clamp
  });
});

describe("sampleNode combinators", () => {
  it("MULTIPLY of a 300 Hz carrier and an 8 Hz modulator beats at 8 Hz", () => {
    const node: CombinatorNode = {
      type: "combinator",
      op: "MULTIPLY",
      children: [osc(300), osc(8)],
    };
    const rate = 2000;
    const s = sampleNode(node, rate, 1000);
    const env = slidingMax(s, Math.round(rate / 300) * 2);
    const target = env.map((_, i) =>
      Math.abs(Math.sin(2 * Math.PI * 8 * (i / rate))),
    );
    expect(pearson(env, target)).toBeGreaterThan(0.9);
  });

  it("CONCAT splits the sample budget evenly, first children get extras", () => {
    // two constant-ish children distinguished by sign
    const pos = osc(0, "SQUARE"); // sin(0) >= 0 -> +1 everywhere
    const neg: OscillatorNode = { ...osc(0, "SQUARE"), phase: Math.PI + 0.1 };
    const node: CombinatorNode = {
      type: "combinator",
      op: "CONCAT",
      children: [pos, neg],
    };
    const s = sampleNode(node, 1000, 5); // 5 samples over two children: 3 + 2
    expect([...s]).toEqual([1, 1, 1, -1, -1]);
  });

  it("nests combinators", () => {
    const node: CombinatorNode = {
      type: "combinator",
      op: "MULTIPLY",
      children: [
        osc(20),
        {
          type: "combinator",
          op: "CONCAT",
          children: [
            { type: "envelope", kind: "RAMP" },
            { type: "envelope", kind: "COS2" },
          ],
        },
      ],
    };
    const s = sampleNode(node, 1000, 1000);
    expect(s.length).toBe(1000);
    expect(Math.max(...s)).toBeLessThanOrEqual(1.0);
  });
});

describe("maxOscillatorFreq", () => {
  it("walks the tree and takes sweep maxima", () => {
    const node: CombinatorNode = {
      type: "combinator",
      op: "MULTIPLY",
      children: [
        osc([
          [0, 123],
          [500, 384],
        ]),
        { type: "envelope", kind: "RAMP" },
      ],
    };
    expect(maxOscillatorFreq(node)).toBe(384);
    expect(maxOscillatorFreq({ type: "envelope", kind: "COS2" })).toBe(0);
  });
});

describe("multiplyCompose", () => {
  it("adopts the template when the visualizer is empty", () => {
    const template = osc(170);
    expect(multiplyCompose(null, template)).toBe(template);
  });

  it("wraps current and template in a MULTIPLY combinator", () => {
    const current: WaveformNode = osc(300);
    const template: WaveformNode = osc(8);
    const combined = multiplyCompose(current, template);
    expect(combined).toEqual({
      type: "combinator",
      op: "MULTIPLY",
      children: [current, template],
    });
  });

  it("the composed product of 300 Hz and 8 Hz beats like the direct product", () => {
    const combined = multiplyCompose(osc(300), osc(8));
    const rate = 2000;
    const a = sampleNode(combined, rate, 500);
    const direct = sampleNode(
      { type: "combinator", op: "MULTIPLY", children: [osc(300), osc(8)] },
      rate,
      500,
    );
    expect([...a]).toEqual([...direct]);
  });
});

describe("importKeyframes", () => {
  it("accepts a bare pair array", () => {
    const node = importKeyframes("[[0, 0.0], [250, 1.0], [500, 0.2]]");
    expect(node.kind).toBe("KEYFRAMES");
    expect(node.keyframes).toEqual([
      [0, 0],
      [250, 1],
      [500, 0.2],
    ]);
  });

  it("accepts a full envelope node", () => {
    const node = importKeyframes(
      '{"type": "envelope", "kind": "KEYFRAMES", "keyframes": [[0, 1], [100, 0]]}',
    );
    expect(node.keyframes).toEqual([
      [0, 1],
      [100, 0],
    ]);
  });

  it("rejects garbage, bad shapes, bad ranges, and unsorted times", () => {
    expect(() => importKeyframes("not json")).toThrow(/not valid JSON/);
    expect(() => importKeyframes('{"type": "oscillator"}')).toThrow(
      /expected a keyframe array/,
    );
    expect(() => importKeyframes("[[0]]")).toThrow(/each entry/);
    expect(() => importKeyframes('[[0, "x"]]')).toThrow(/each entry/);
    expect(() => importKeyframes("[[0, 1.5]]")).toThrow(/0\.\.1/);
    expect(() => importKeyframes("[[100, 0.5], [50, 0.5]]")).toThrow(
      /non-decreasing/,
    );
    expect(() => importKeyframes("[]")).toThrow(/at least one/);
  });

  it("imported envelopes sample like hand-built ones", () => {
    const node = importKeyframes("[[0, 0.0], [500, 1.0]]");
    const s = sampleNode(node, 1000, 500);
    expect(s[250]).toBeCloseTo(0.5, 6);
  });
});

describe("sampleNode validation", () => {
  it("rejects non-positive rate or duration", () => {
    expect(() => sampleNode(osc(10), 0, 100)).toThrow(/rate/);
    expect(() => sampleNode(osc(10), 1000, 0)).toThrow(/duration/);
  });
});
