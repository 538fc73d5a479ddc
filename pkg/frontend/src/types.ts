// Wire types shared with the pattern service. These mirror the JSON the
// service accepts and returns; the editor never invents fields of its own.

export type Shape = "SINE" | "SQUARE" | "TRIANGLE" | "SAW";
export type EnvelopeKind = "RAMP" | "COS2" | "KEYFRAMES";
export type CombineOp = "MULTIPLY" | "CONCAT";

export interface OscillatorNode {
  type: "oscillator";
  shape: Shape;
  // scalar Hz, or [t_ms, hz] pairs for a sweep
  freq_hz: number | [number, number][];
  amplitude: number;
  phase: number;
}

export interface EnvelopeNode {
  type: "envelope";
  kind: EnvelopeKind;
  keyframes?: [number, number][];
}

export interface CombinatorNode {
  type: "combinator";
  op: CombineOp;
  children: WaveformNode[];
}

export type WaveformNode = OscillatorNode | EnvelopeNode | CombinatorNode;

export interface UnitRef {
  address: number;
  x: number;
  y: number;
}

export interface AssignmentSpan {
  chain: number;
  address: number;
  waveform: string;
  t_start_ms: number;
  t_end_ms: number;
}

export interface PatternDoc {
  version: number;
  chains: UnitRef[][];
  assignments: AssignmentSpan[];
  waveforms: Record<string, WaveformNode>;
}

export interface PatternResource {
  id: string;
  revision: number;
  unit_count: number;
  document: PatternDoc;
}

export interface CommandRow {
  t_ms: number;
  chain: number;
  address: number;
  action: string;
  intensity: number | null;
  frequency_index: number | null;
  waveform: string | null;
}

export interface CompileResponse {
  count: number;
  commands: CommandRow[];
}

export interface UnitKey {
  chain: number;
  addr: number;
}

export interface UnitState extends UnitKey {
  active: boolean;
  intensity: number;
  freq_idx: number;
}

export interface Frame {
  t_ms: number;
  units: UnitState[];
}

export interface PlayResponse {
  session_id: string;
  status: string;
  frame_count: number;
  end_ms: number;
}

export interface SessionStatus {
  session_id: string;
  status: string;
  cursor_ms: number;
}

export interface ScrubResponse {
  t_ms: number;
  units: UnitKey[];
}

// Hard device limits; the service enforces them, the editor prechecks them
// so a rejected edit never leaves the canvas.
export const MAX_CHAINS = 8;
export const MAX_CHAIN_LENGTH = 16;
export const FRAME_RATE_HZ = 30;
export const FRAME_STEP_MS = 1000 / FRAME_RATE_HZ;

export function emptyDocument(): PatternDoc {
  return { version: 1, chains: [], assignments: [], waveforms: {} };
}

export function patternDuration(doc: PatternDoc): number {
  let end = 0;
  for (const a of doc.assignments) end = Math.max(end, a.t_end_ms);
  return end;
}

export function unitKeyString(chain: number, addr: number): string {
  return chain + ":" + addr;
}

export function cloneDoc(doc: PatternDoc): PatternDoc {
  return JSON.parse(JSON.stringify(doc)) as PatternDoc;
}
