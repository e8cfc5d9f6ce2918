/** UI state and its pure transitions.
 *
 * Everything here is a function of (server data, local cursor); the DOM layer
 * only projects the returned state, so a full refresh reproduces the view.
 */

export type TraceStyle = "dots" | "lines";

export interface PendingGuess {
  label: string;
  frame: number;
  x: number;
  y: number;
  status: "ok" | "lost";
}

export interface UiState {
  frame: number;
  primaryLayer: string | null;
  overlayLayer: string | null;
  label: string;
  playing: boolean;
  pauseAtAnnotated: boolean;
  traceStyle: TraceStyle;
  pendingGuess: PendingGuess | null;
}

export function initialState(labels: string[]): UiState {
  return {
    frame: 0,
    primaryLayer: null,
    overlayLayer: null,
    label: labels[0] ?? "0",
    playing: false,
    pauseAtAnnotated: false,
    traceStyle: "dots",
    pendingGuess: null,
  };
}

export function clampFrame(frame: number, nFrames: number): number {
  return Math.min(Math.max(Math.round(frame), 0), nFrames - 1);
}

export function seek(state: UiState, frame: number, nFrames: number): UiState {
  return { ...state, frame: clampFrame(frame, nFrames) };
}

export function step(state: UiState, delta: number, nFrames: number): UiState {
  return seek({ ...state, playing: false }, state.frame + delta, nFrames);
}

function cycle(items: string[], current: string | null, dir: 1 | -1): string | null {
  if (items.length === 0) return null;
  if (current === null) return dir === 1 ? items[0] : items[items.length - 1];
  const at = items.indexOf(current);
  if (at < 0) return items[0];
  return items[(at + dir + items.length) % items.length];
}

export function cycleLabel(state: UiState, labels: string[], dir: 1 | -1): UiState {
  const label = cycle(labels, state.label, dir);
  return label === null ? state : { ...state, label, pendingGuess: null };
}

/** Cycle the primary layer, skipping the current overlay so the two stay distinct. */
export function cyclePrimary(state: UiState, layerNames: string[], dir: 1 | -1): UiState {
  const allowed = layerNames.filter((n) => n !== state.overlayLayer);
  return { ...state, primaryLayer: cycle(allowed, state.primaryLayer, dir) };
}

/** Cycle the overlay layer through (none, layers != primary). */
export function cycleOverlay(state: UiState, layerNames: string[], dir: 1 | -1): UiState {
  const allowed = layerNames.filter((n) => n !== state.primaryLayer);
  if (allowed.length === 0) return { ...state, overlayLayer: null };
  if (state.overlayLayer === null) {
    return { ...state, overlayLayer: dir === 1 ? allowed[0] : allowed[allowed.length - 1] };
  }
  const at = allowed.indexOf(state.overlayLayer);
  const next = at + dir;
  if (next < 0 || next >= allowed.length) return { ...state, overlayLayer: null };
  return { ...state, overlayLayer: allowed[next] };
}

export function toggleTraceStyle(state: UiState): UiState {
  return { ...state, traceStyle: state.traceStyle === "dots" ? "lines" : "dots" };
}

export function togglePlaying(state: UiState): UiState {
  return { ...state, playing: !state.playing };
}

export function togglePauseAtAnnotated(state: UiState): UiState {
  return { ...state, pauseAtAnnotated: !state.pauseAtAnnotated };
}

/** First annotated frame strictly after `after`, or null. */
export function nextAnnotatedFrame(annotated: number[], after: number): number | null {
  for (const f of annotated) {
    if (f > after) return f;
  }
  return null;
}

/** One playback step; halts at the sequence end and, when enabled, at the
 * next annotated frame. */
export function playbackTick(state: UiState, nFrames: number, annotated: number[]): UiState {
  if (!state.playing) return state;
  const next = state.frame + 1;
  if (next > nFrames - 1) {
    return { ...state, frame: nFrames - 1, playing: false };
  }
  if (state.pauseAtAnnotated && annotated.includes(next)) {
    return { ...state, frame: next, playing: false };
  }
  return { ...state, frame: next };
}

export function proposeGuess(state: UiState, guess: PendingGuess): UiState {
  return { ...state, pendingGuess: guess };
}

export function cancelGuess(state: UiState): UiState {
  return { ...state, pendingGuess: null };
}

/** Consume the pending guess; the caller is responsible for the server PUT. */
export function takeGuess(state: UiState): { state: UiState; guess: PendingGuess | null } {
  return { state: { ...state, pendingGuess: null }, guess: state.pendingGuess };
}
