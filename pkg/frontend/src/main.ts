/** DOM shell: binds the controller to the three stacked panels. */

import { ApiClient } from "./api.js";
import { Controller } from "./controller.js";
import { drawTrace, drawVideo, tracesForLabel, videoModel } from "./draw.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const api = new ApiClient("");
const controller = new Controller(api);

const videoCanvas = el<HTMLCanvasElement>("video-panel");
const traceX = el<HTMLCanvasElement>("trace-x");
const traceY = el<HTMLCanvasElement>("trace-y");
const status = el<HTMLDivElement>("status");
const toast = el<HTMLDivElement>("toast");

const frameImages = new Map<number, HTMLImageElement>();

function frameImage(index: number): HTMLImageElement | null {
  const cached = frameImages.get(index);
  if (cached) return cached.complete ? cached : null;
  const img = new Image();
  img.onload = () => render();
  img.src = api.frameUrl(index);
  frameImages.set(index, img);
  if (frameImages.size > 512) {
    const first = frameImages.keys().next().value;
    if (first !== undefined && first !== index) frameImages.delete(first);
  }
  return img.complete ? img : null;
}

function showError(message: string | null): void {
  if (!message) return;
  toast.textContent = message;
  toast.classList.add("visible");
  window.setTimeout(() => toast.classList.remove("visible"), 4000);
  controller.lastError = null;
}

function render(): void {
  if (!controller.meta) return;
  const meta = controller.meta;
  const scaleX = videoCanvas.width / meta.width;
  const scaleY = videoCanvas.height / meta.height;
  const ctx = videoCanvas.getContext("2d");
  if (ctx) {
    drawVideo(
      ctx,
      videoModel(
        controller.state,
        frameImage(controller.state.frame),
        controller.primaryData,
        controller.overlayData,
        scaleX,
        scaleY,
      ),
    );
  }
  for (const [canvas, axis] of [
    [traceX, 0],
    [traceY, 1],
  ] as [HTMLCanvasElement, 0 | 1][]) {
    const tctx = canvas.getContext("2d");
    if (!tctx) continue;
    drawTrace(
      tctx,
      meta.frames,
      controller.state.frame,
      tracesForLabel(controller.primaryData, controller.state.label, axis),
      tracesForLabel(controller.overlayData, controller.state.label, axis),
      controller.state.traceStyle,
    );
  }
  status.textContent =
    controller.statusLine() +
    (controller.state.pauseAtAnnotated ? "  [pause-at-annotated]" : "") +
    (controller.state.pendingGuess ? "  [guess pending: Enter to confirm, Esc to cancel]" : "");
  showError(controller.lastError);
}

controller.onChange(render);

videoCanvas.addEventListener("click", (ev) => {
  if (!controller.meta) return;
  const rect = videoCanvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * controller.meta.width;
  const y = ((ev.clientY - rect.top) / rect.height) * controller.meta.height;
  void controller.clickVideo(x, y);
});

for (const canvas of [traceX, traceY]) {
  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    controller.seekFromTraceClick(x, canvas.width);
  });
}

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLTextAreaElement) return;
  const handled = [
    "ArrowLeft", "ArrowRight", "[", "]", "p", "P", "o", "O",
    " ", "a", "t", "g", "Enter", "Escape", "Delete", "Backspace", "s",
  ];
  if (handled.includes(ev.key)) ev.preventDefault();
  void controller.handleKey(ev.key, ev.shiftKey);
});

let playTimer: number | null = null;

function syncPlayback(): void {
  const fps = controller.meta?.fps ?? 25;
  if (controller.state.playing && playTimer === null) {
    playTimer = window.setInterval(() => {
      if (!controller.tick()) syncPlayback();
    }, 1000 / fps);
  } else if (!controller.state.playing && playTimer !== null) {
    window.clearInterval(playTimer);
    playTimer = null;
  }
}

controller.onChange(syncPlayback);

void controller.init().then(() => {
  if (controller.meta) {
    videoCanvas.width = controller.meta.width * 6;
    videoCanvas.height = controller.meta.height * 6;
  }
  render();
});
