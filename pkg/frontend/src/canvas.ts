// Canvas pane geometry. Pure functions from document + playback state to
// drawable primitives, so tests can check layout without a DOM.

import type { Frame, PatternDoc, UnitKey } from "./types.js";
import { unitKeyString } from "./types.js";

export interface UnitVisual {
  chain: number;
  addr: number;
  x: number;
  y: number;
  radius: number;
  // fill opacity, linear in intensity 0..15; highlight ring from scrub
  fillAlpha: number;
  highlighted: boolean;
  selected: boolean;
}

export interface Polyline {
  chain: number;
  points: { x: number; y: number }[];
}

export const UNIT_RADIUS = 12;
const IDLE_ALPHA = 0.15;

export function unitVisuals(
  doc: PatternDoc,
  highlights: Set<string>,
  selected: UnitKey | null,
  frame: Frame | null,
): UnitVisual[] {
  const live = new Map<string, number>();
  if (frame) {
    for (const u of frame.units) {
      if (u.active) live.set(unitKeyString(u.chain, u.addr), u.intensity);
    }
  }
  const out: UnitVisual[] = [];
  doc.chains.forEach((units, chain) => {
    for (const unit of units) {
      const key = unitKeyString(chain, unit.address);
      const intensity = live.get(key);
      out.push({
        chain,
        addr: unit.address,
        x: unit.x,
        y: unit.y,
        radius: UNIT_RADIUS,
        fillAlpha:
          intensity !== undefined ? intensity / 15 : IDLE_ALPHA,
        highlighted: highlights.has(key),
        selected:
          selected !== null &&
          selected.chain === chain &&
          selected.addr === unit.address,
      });
    }
  });
  return out;
}

// One polyline per chain, tracing units in address order: the wiring.
export function chainPolylines(doc: PatternDoc): Polyline[] {
  return doc.chains.map((units, chain) => ({
    chain,
    points: [...units]
      .sort((a, b) => a.address - b.address)
      .map((u) => ({ x: u.x, y: u.y })),
  }));
}

// Topmost unit under the pointer, or null. Later chains draw on top.
export function hitTest(
  doc: PatternDoc,
  x: number,
  y: number,
  radius = UNIT_RADIUS,
): UnitKey | null {
  for (let chain = doc.chains.length - 1; chain >= 0; chain--) {
    const units = doc.chains[chain];
    for (let i = units.length - 1; i >= 0; i--) {
      const u = units[i];
      const dx = u.x - x;
      const dy = u.y - y;
      if (dx * dx + dy * dy <= radius * radius) {
        return { chain, addr: u.address };
      }
    }
  }
  return null;
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

// Fit the document's unit bounding box into a viewport with padding.
export function fitTransform(
  doc: PatternDoc,
  width: number,
  height: number,
  pad = 24,
): ViewTransform {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const units of doc.chains) {
    for (const u of units) {
      minX = Math.min(minX, u.x);
      minY = Math.min(minY, u.y);
      maxX = Math.max(maxX, u.x);
      maxY = Math.max(maxY, u.y);
    }
  }
  if (minX > maxX) return { scale: 1, offsetX: 0, offsetY: 0 };
  const spanX = Math.max(maxX - minX, 1);
  const spanY = Math.max(maxY - minY, 1);
  const scale = Math.min(
    (width - 2 * pad) / spanX,
    (height - 2 * pad) / spanY,
    4,
  );
  return {
    scale,
    offsetX: pad - minX * scale + (width - 2 * pad - spanX * scale) / 2,
    offsetY: pad - minY * scale + (height - 2 * pad - spanY * scale) / 2,
  };
}

export function toScreen(
  t: ViewTransform,
  x: number,
  y: number,
): { x: number; y: number } {
  return { x: x * t.scale + t.offsetX, y: y * t.scale + t.offsetY };
}

export function toWorld(
  t: ViewTransform,
  x: number,
  y: number,
): { x: number; y: number } {
  return { x: (x - t.offsetX) / t.scale, y: (y - t.offsetY) / t.scale };
}
