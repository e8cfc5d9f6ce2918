/** Trace panel geometry: frame<->pixel mapping and vertex decimation. */

export const MAX_TRACE_VERTICES = 5000;

export interface TracePoint {
  frame: number;
  value: number;
}

/** Horizontal pixel of a frame inside a panel of `widthPx`. */
export function frameToX(frame: number, nFrames: number, widthPx: number): number {
  if (nFrames <= 1) return 0;
  return (frame / (nFrames - 1)) * (widthPx - 1);
}

/** Inverse of frameToX, rounded and clamped; click-to-seek uses this. */
export function frameFromTraceX(xPx: number, widthPx: number, nFrames: number): number {
  if (nFrames <= 1 || widthPx <= 1) return 0;
  const frame = Math.round((xPx / (widthPx - 1)) * (nFrames - 1));
  return Math.min(Math.max(frame, 0), nFrames - 1);
}

export interface ValueRange {
  lo: number;
  hi: number;
}

export function valueRange(series: TracePoint[][], pad = 0.05): ValueRange {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s) {
      if (p.value < lo) lo = p.value;
      if (p.value > hi) hi = p.value;
    }
  }
  if (lo > hi) return { lo: 0, hi: 1 };
  if (lo === hi) return { lo: lo - 1, hi: hi + 1 };
  const margin = (hi - lo) * pad;
  return { lo: lo - margin, hi: hi + margin };
}

export function valueToY(value: number, range: ValueRange, heightPx: number): number {
  const t = (value - range.lo) / (range.hi - range.lo);
  return (1 - t) * (heightPx - 1);
}

/** Min/max bucket decimation keeping the vertex count <= maxVertices while
 * preserving every bucket's extremes (so spikes stay visible). */
export function decimateMinMax(points: TracePoint[], maxVertices = MAX_TRACE_VERTICES): TracePoint[] {
  if (points.length <= maxVertices) return points;
  const buckets = Math.max(1, Math.floor(maxVertices / 2));
  const per = points.length / buckets;
  const out: TracePoint[] = [];
  for (let b = 0; b < buckets; b++) {
    const start = Math.floor(b * per);
    const end = Math.min(points.length, Math.floor((b + 1) * per));
    if (start >= end) continue;
    let minAt = start;
    let maxAt = start;
    for (let i = start + 1; i < end; i++) {
      if (points[i].value < points[minAt].value) minAt = i;
      if (points[i].value > points[maxAt].value) maxAt = i;
    }
    const first = Math.min(minAt, maxAt);
    const second = Math.max(minAt, maxAt);
    out.push(points[first]);
    if (second !== first) out.push(points[second]);
  }
  return out;
}

/** Sparse frame->point map to sorted per-axis trace points. */
export function traceSeries(
  points: Record<string, [number, number]>,
  axis: 0 | 1,
): TracePoint[] {
  const out: TracePoint[] = [];
  for (const key of Object.keys(points)) {
    out.push({ frame: Number(key), value: points[key][axis] });
  }
  out.sort((a, b) => a.frame - b.frame);
  return out;
}
