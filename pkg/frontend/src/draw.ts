/** Canvas projections of the UI state: video panel and the two trace panels. */

import type { LabelTrajectory } from "./api.js";
import type { TraceStyle, UiState } from "./state.js";
import {
  decimateMinMax,
  frameToX,
  TracePoint,
  traceSeries,
  valueRange,
  valueToY,
} from "./traces.js";

export const PRIMARY_COLOR = "#ffd166";
export const OVERLAY_COLOR = "rgba(102, 204, 255, 0.45)";
export const GUESS_COLOR = "#ff5d8f";
const CURSOR_COLOR = "#e8e8e8";

export interface VideoModel {
  image: CanvasImageSource | null;
  /** markers already scaled to canvas pixels */
  primary: { x: number; y: number; current: boolean }[];
  overlay: { x: number; y: number }[];
  guess: { x: number; y: number } | null;
}

/** Markers for one frame: primary layer opaque, overlay translucent. */
export function videoModel(
  state: UiState,
  image: CanvasImageSource | null,
  primaryPoints: Map<string, LabelTrajectory>,
  overlayPoints: Map<string, LabelTrajectory>,
  scaleX: number,
  scaleY: number,
): VideoModel {
  const key = String(state.frame);
  const primary: VideoModel["primary"] = [];
  for (const [label, traj] of primaryPoints) {
    const p = traj.points[key];
    if (p) primary.push({ x: p[0] * scaleX, y: p[1] * scaleY, current: label === state.label });
  }
  const overlay: VideoModel["overlay"] = [];
  for (const traj of overlayPoints.values()) {
    const p = traj.points[key];
    if (p) overlay.push({ x: p[0] * scaleX, y: p[1] * scaleY });
  }
  const guess =
    state.pendingGuess && state.pendingGuess.frame === state.frame
      ? { x: state.pendingGuess.x * scaleX, y: state.pendingGuess.y * scaleY }
      : null;
  return { image, primary, overlay, guess };
}

export function drawVideo(ctx: CanvasRenderingContext2D, model: VideoModel): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (model.image) ctx.drawImage(model.image, 0, 0, width, height);
  for (const m of model.overlay) {
    dot(ctx, m.x, m.y, 5, OVERLAY_COLOR);
  }
  for (const m of model.primary) {
    dot(ctx, m.x, m.y, m.current ? 6 : 4, PRIMARY_COLOR);
    if (m.current) ring(ctx, m.x, m.y, 9, PRIMARY_COLOR);
  }
  if (model.guess) {
    ring(ctx, model.guess.x, model.guess.y, 8, GUESS_COLOR);
    cross(ctx, model.guess.x, model.guess.y, 6, GUESS_COLOR);
  }
}

export function drawTrace(
  ctx: CanvasRenderingContext2D,
  nFrames: number,
  currentFrame: number,
  primary: TracePoint[],
  overlay: TracePoint[],
  style: TraceStyle,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const range = valueRange([primary, overlay]);
  plotSeries(ctx, decimateMinMax(overlay), nFrames, range, "lines", OVERLAY_COLOR, width, height);
  plotSeries(ctx, decimateMinMax(primary), nFrames, range, style, PRIMARY_COLOR, width, height);
  const cx = frameToX(currentFrame, nFrames, width);
  ctx.strokeStyle = CURSOR_COLOR;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(cx + 0.5, 0);
  ctx.lineTo(cx + 0.5, height);
  ctx.stroke();
}

export function tracesForLabel(
  trajectories: Map<string, LabelTrajectory>,
  label: string,
  axis: 0 | 1,
): TracePoint[] {
  const traj = trajectories.get(label);
  return traj ? traceSeries(traj.points, axis) : [];
}

function plotSeries(
  ctx: CanvasRenderingContext2D,
  pts: TracePoint[],
  nFrames: number,
  range: { lo: number; hi: number },
  style: TraceStyle,
  color: string,
  width: number,
  height: number,
): void {
  if (pts.length === 0) return;
  if (style === "lines") {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    pts.forEach((p, i) => {
      const x = frameToX(p.frame, nFrames, width);
      const y = valueToY(p.value, range, height);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  } else {
    for (const p of pts) {
      dot(ctx, frameToX(p.frame, nFrames, width), valueToY(p.value, range, height), 2, color);
    }
  }
}

function dot(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string): void {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function ring(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.stroke();
}

function cross(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x - r, y);
  ctx.lineTo(x + r, y);
  ctx.moveTo(x, y - r);
  ctx.lineTo(x, y + r);
  ctx.stroke();
}
