// Browser entry point: wires the four panes to the store and redraws on
// every store change. All layout math lives in the pure modules; this
// file only touches the DOM.

import { ServiceClient } from "./api.js";
import {
  chainPolylines,
  fitTransform,
  hitTest,
  toScreen,
  toWorld,
  unitVisuals,
} from "./canvas.js";
import { EditorStore } from "./state.js";
import {
  assignmentBlocks,
  msToPx,
  pxToMs,
  timelineHeight,
} from "./timeline.js";
import { TEMPLATES, waveformPath } from "./visualizer.js";

const UNIT_FILL = "#2d6cdf";
const HIGHLIGHT_RING = "#e8902c";
const SELECT_RING = "#17b26a";
const BLOCK_FILL = "#4a7dd0";
const CURSOR_LINE = "#d0453e";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error("missing element #" + id);
  return node as T;
}

export function bootstrap(): void {
  const store = new EditorStore(new ServiceClient(""));

  const canvasEl = el<HTMLCanvasElement>("canvas-pane");
  const timelineEl = el<HTMLCanvasElement>("timeline-pane");
  const visualEl = el<HTMLCanvasElement>("visual-pane");
  const banner = el<HTMLDivElement>("banner");
  const canvasMsg = el<HTMLSpanElement>("canvas-msg");
  const libraryMsg = el<HTMLSpanElement>("library-msg");
  const statusLine = el<HTMLSpanElement>("status-line");
  const chainLength = el<HTMLInputElement>("chain-length");
  const importName = el<HTMLInputElement>("import-name");
  const importText = el<HTMLTextAreaElement>("import-text");

  function redraw(): void {
    drawCanvasPane();
    drawTimelinePane();
    drawVisualPane();
    banner.textContent = store.banner ?? "";
    banner.style.display = store.banner ? "block" : "none";
    const fm = store.fieldMessage;
    canvasMsg.textContent =
      fm && (fm.field === "chains" || fm.field === "canvas") ? fm.message : "";
    libraryMsg.textContent =
      fm && (fm.field === "library" || fm.field === "timeline")
        ? fm.message
        : "";
    statusLine.textContent =
      (store.patternId ?? "no pattern") +
      "  rev " +
      store.revision +
      "  " +
      store.playState +
      "  t=" +
      store.cursorMs.toFixed(1) +
      " ms";
  }

  function drawCanvasPane(): void {
    const ctx = canvasEl.getContext("2d");
    if (!ctx) return;
    const { width, height } = canvasEl;
    ctx.clearRect(0, 0, width, height);
    const view = fitTransform(store.doc, width, height);
    ctx.strokeStyle = "#9aa4b1";
    ctx.lineWidth = 1.5;
    for (const line of chainPolylines(store.doc)) {
      ctx.beginPath();
      line.points.forEach((p, i) => {
        const s = toScreen(view, p.x, p.y);
        if (i === 0) ctx.moveTo(s.x, s.y);
        else ctx.lineTo(s.x, s.y);
      });
      ctx.stroke();
    }
    const visuals = unitVisuals(
      store.doc,
      store.highlights,
      store.selected,
      store.lastFrame,
    );
    for (const v of visuals) {
      const s = toScreen(view, v.x, v.y);
      ctx.beginPath();
      ctx.arc(s.x, s.y, v.radius, 0, 2 * Math.PI);
      ctx.globalAlpha = v.fillAlpha;
      ctx.fillStyle = UNIT_FILL;
      ctx.fill();
      ctx.globalAlpha = 1;
      ctx.strokeStyle = v.selected
        ? SELECT_RING
        : v.highlighted
          ? HIGHLIGHT_RING
          : "#5b6570";
      ctx.lineWidth = v.selected || v.highlighted ? 3 : 1;
      ctx.stroke();
    }
  }

  function drawTimelinePane(): void {
    const ctx = timelineEl.getContext("2d");
    if (!ctx) return;
    const { width } = timelineEl;
    timelineEl.height = Math.max(60, timelineHeight(store.doc) + 10);
    ctx.clearRect(0, 0, width, timelineEl.height);
    ctx.fillStyle = BLOCK_FILL;
    for (const block of assignmentBlocks(store.doc, width)) {
      ctx.fillRect(block.x, block.y + 5, Math.max(block.width, 2), block.height);
    }
    const x = msToPx(store.cursorMs, store.durationMs(), width);
    ctx.strokeStyle = CURSOR_LINE;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, timelineEl.height);
    ctx.stroke();
  }

  function drawVisualPane(): void {
    const ctx = visualEl.getContext("2d");
    if (!ctx) return;
    const { width, height } = visualEl;
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#b3bcc7";
    ctx.beginPath();
    ctx.moveTo(0, height / 2);
    ctx.lineTo(width, height / 2);
    ctx.stroke();
    if (!store.visualWaveform) return;
    const points = waveformPath(store.visualWaveform, width, height);
    if (points.length === 0) return;
    ctx.strokeStyle = UNIT_FILL;
    ctx.lineWidth = 1;
    ctx.beginPath();
    points.forEach((p, i) => {
      if (i === 0) ctx.moveTo(p.x, p.y);
      else ctx.lineTo(p.x, p.y);
    });
    ctx.stroke();
  }

  // --- canvas interactions: select on press, drag to move -----------------

  let dragging: { chain: number; addr: number; moved: boolean } | null = null;

  canvasEl.addEventListener("pointerdown", (ev) => {
    const view = fitTransform(store.doc, canvasEl.width, canvasEl.height);
    const rect = canvasEl.getBoundingClientRect();
    const w = toWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
    const hit = hitTest(store.doc, w.x, w.y);
    if (hit) {
      store.selectUnit(hit.chain, hit.addr);
      dragging = { ...hit, moved: false };
      canvasEl.setPointerCapture(ev.pointerId);
    }
  });

  canvasEl.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    dragging.moved = true;
    const view = fitTransform(store.doc, canvasEl.width, canvasEl.height);
    const rect = canvasEl.getBoundingClientRect();
    const w = toWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
    void store.moveUnit(dragging.chain, dragging.addr, w.x, w.y);
  });

  canvasEl.addEventListener("pointerup", () => {
    dragging = null;
  });

  // --- timeline interactions: click or drag to scrub ----------------------

  let scrubbing = false;

  timelineEl.addEventListener("pointerdown", (ev) => {
    scrubbing = true;
    const rect = timelineEl.getBoundingClientRect();
    void store.scrub(
      pxToMs(ev.clientX - rect.left, store.durationMs(), timelineEl.width),
    );
  });

  timelineEl.addEventListener("pointermove", (ev) => {
    if (!scrubbing) return;
    const rect = timelineEl.getBoundingClientRect();
    void store.scrub(
      pxToMs(ev.clientX - rect.left, store.durationMs(), timelineEl.width),
    );
  });

  window.addEventListener("pointerup", () => {
    scrubbing = false;
  });

  // --- library: template chips drag onto the visualizer -------------------

  const chips = el<HTMLDivElement>("template-chips");
  for (const name of Object.keys(TEMPLATES)) {
    const chip = document.createElement("button");
    chip.textContent = name;
    chip.className = "chip";
    chip.draggable = true;
    chip.addEventListener("dragstart", (ev) => {
      ev.dataTransfer?.setData("text/plain", name);
    });
    chip.addEventListener("click", () => {
      void store.composeTemplate(TEMPLATES[name]);
    });
    chips.appendChild(chip);
  }

  visualEl.addEventListener("dragover", (ev) => ev.preventDefault());
  visualEl.addEventListener("drop", (ev) => {
    ev.preventDefault();
    const name = ev.dataTransfer?.getData("text/plain") ?? "";
    if (TEMPLATES[name]) void store.composeTemplate(TEMPLATES[name]);
  });

  // --- buttons ------------------------------------------------------------

  el<HTMLButtonElement>("new-pattern").addEventListener("click", () => {
    void store.newPattern();
  });
  el<HTMLButtonElement>("add-chain").addEventListener("click", () => {
    void store.addChain(parseInt(chainLength.value, 10) || 1);
  });
  el<HTMLButtonElement>("play").addEventListener("click", () => {
    void store.play(store.cursorMs);
  });
  el<HTMLButtonElement>("stop").addEventListener("click", () => {
    void store.stop();
  });
  el<HTMLButtonElement>("import-btn").addEventListener("click", () => {
    void store.importKeyframeJson(
      importName.value.trim() || "imported",
      importText.value,
    );
  });
  banner.addEventListener("click", () => store.clearBanner());

  store.subscribe(redraw);
  redraw();
  void store.newPattern();
}

// Only run in a real page; unit tests import the pure modules directly.
if (typeof document !== "undefined" && document.getElementById("canvas-pane")) {
  bootstrap();
}
