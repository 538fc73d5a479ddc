// Waveform visualizer pane: turn a waveform tree into a drawable path.

import type { WaveformNode } from "./types.js";
import { displayRate, sampleNode } from "./waveform.js";

export interface PathPoint {
  x: number;
  y: number;
}

export const DEFAULT_VIEW_MS = 1000;

// Sample the node over the view window and map to screen coordinates.
// y axis: +1 at the top edge, -1 at the bottom. Decimates with min/max
// pairs so carriers render as a filled band instead of aliasing.
export function waveformPath(
  node: WaveformNode,
  width: number,
  height: number,
  durationMs = DEFAULT_VIEW_MS,
): PathPoint[] {
  const rate = displayRate(node);
  let samples: Float64Array;
  try {
    samples = sampleNode(node, rate, durationMs);
  } catch {
    return [];
  }
  const n = samples.length;
  if (n === 0) return [];
  const columns = Math.max(1, Math.floor(width));
  const toY = (v: number) => ((1 - v) / 2) * height;
  const points: PathPoint[] = [];
  if (n <= columns) {
    for (let i = 0; i < n; i++) {
      points.push({ x: (i / Math.max(n - 1, 1)) * width, y: toY(samples[i]) });
    }
    return points;
  }
  for (let c = 0; c < columns; c++) {
    const lo = Math.floor((c / columns) * n);
    const hi = Math.max(lo + 1, Math.floor(((c + 1) / columns) * n));
    let vMin = samples[lo];
    let vMax = samples[lo];
    for (let i = lo + 1; i < hi; i++) {
      vMin = Math.min(vMin, samples[i]);
      vMax = Math.max(vMax, samples[i]);
    }
    const x = (c / (columns - 1 || 1)) * width;
    points.push({ x, y: toY(vMax) });
    points.push({ x, y: toY(vMin) });
  }
  return points;
}

// Built-in drag sources for the library pane.
export const TEMPLATES: Record<string, WaveformNode> = {
  "sine-170": {
    type: "oscillator",
    shape: "SINE",
    freq_hz: 170,
    amplitude: 1.0,
    phase: 0.0,
  },
  "square-235": {
    type: "oscillator",
    shape: "SQUARE",
    freq_hz: 235,
    amplitude: 1.0,
    phase: 0.0,
  },
  "ramp-up": { type: "envelope", kind: "RAMP" },
  "smooth-pulse": { type: "envelope", kind: "COS2" },
  "slow-throb": {
    type: "oscillator",
    shape: "SINE",
    freq_hz: 8,
    amplitude: 1.0,
    phase: 0.0,
  },
};
