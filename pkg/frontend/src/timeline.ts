// Timeline pane geometry: assignment blocks on per-unit rows plus the
// time <-> pixel mapping the scrub cursor uses.

import type { AssignmentSpan, PatternDoc } from "./types.js";
import { patternDuration, unitKeyString } from "./types.js";

export interface TimelineBlock {
  assignmentIndex: number;
  span: AssignmentSpan;
  row: number;
  x: number;
  width: number;
  y: number;
  height: number;
}

export const ROW_HEIGHT = 22;
export const ROW_GAP = 4;

// Stable row order: chains top to bottom, addresses within a chain.
export function rowOrder(doc: PatternDoc): string[] {
  const rows: string[] = [];
  doc.chains.forEach((units, chain) => {
    for (const u of [...units].sort((a, b) => a.address - b.address)) {
      rows.push(unitKeyString(chain, u.address));
    }
  });
  return rows;
}

export function msToPx(tMs: number, durationMs: number, width: number): number {
  if (durationMs <= 0) return 0;
  return (tMs / durationMs) * width;
}

export function pxToMs(x: number, durationMs: number, width: number): number {
  if (width <= 0) return 0;
  const t = (x / width) * durationMs;
  return Math.min(Math.max(t, 0), durationMs);
}

export function assignmentBlocks(
  doc: PatternDoc,
  width: number,
): TimelineBlock[] {
  const duration = patternDuration(doc);
  const rows = rowOrder(doc);
  const rowIndex = new Map(rows.map((key, i) => [key, i]));
  const blocks: TimelineBlock[] = [];
  doc.assignments.forEach((span, assignmentIndex) => {
    const row = rowIndex.get(unitKeyString(span.chain, span.address));
    if (row === undefined) return;
    const x = msToPx(span.t_start_ms, duration, width);
    blocks.push({
      assignmentIndex,
      span,
      row,
      x,
      width: msToPx(span.t_end_ms, duration, width) - x,
      y: row * (ROW_HEIGHT + ROW_GAP),
      height: ROW_HEIGHT,
    });
  });
  return blocks;
}

export function timelineHeight(doc: PatternDoc): number {
  const n = rowOrder(doc).length;
  return n === 0 ? ROW_HEIGHT : n * (ROW_HEIGHT + ROW_GAP) - ROW_GAP;
}
