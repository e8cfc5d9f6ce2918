/** Headless UI controller: owns the state, talks to the server, and exposes
 * the event entry points the DOM layer binds to. No DOM access here, so the
 * whole interaction surface is testable against a live server. */

import { ApiClient, ApiError, LabelTrajectory, Meta } from "./api.js";
import { actionForKey } from "./keys.js";
import {
  cancelGuess,
  cycleLabel,
  cycleOverlay,
  cyclePrimary,
  initialState,
  playbackTick,
  proposeGuess,
  seek,
  step,
  takeGuess,
  togglePauseAtAnnotated,
  togglePlaying,
  toggleTraceStyle,
  UiState,
} from "./state.js";
import { frameFromTraceX } from "./traces.js";

export type Listener = (c: Controller) => void;

export class Controller {
  state: UiState;
  meta: Meta | null = null;
  layerNames: string[] = [];
  primaryData: Map<string, LabelTrajectory> = new Map();
  overlayData: Map<string, LabelTrajectory> = new Map();
  annotated: number[] = [];
  lastError: string | null = null;

  private listeners: Listener[] = [];

  constructor(public api: ApiClient) {
    this.state = initialState([]);
  }

  onChange(fn: Listener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this);
  }

  async init(): Promise<void> {
    this.meta = await this.api.meta();
    this.state = initialState(this.meta.labels);
    const layers = await this.api.layers();
    this.layerNames = layers.layers.map((l) => l.name);
    if (this.layerNames.length > 0) {
      this.state = { ...this.state, primaryLayer: this.layerNames[0] };
    }
    await this.refresh();
  }

  /** Re-pull every displayed trajectory and the annotated-frame index. */
  async refresh(): Promise<void> {
    if (!this.meta) return;
    const layers = await this.api.layers();
    this.layerNames = layers.layers.map((l) => l.name);
    this.primaryData = await this.loadLayer(this.state.primaryLayer);
    this.overlayData = await this.loadLayer(this.state.overlayLayer);
    if (this.state.primaryLayer) {
      this.annotated = (await this.api.annotatedFrames(this.state.primaryLayer)).frames;
    } else {
      this.annotated = [];
    }
    this.emit();
  }

  private async loadLayer(name: string | null): Promise<Map<string, LabelTrajectory>> {
    const out = new Map<string, LabelTrajectory>();
    if (!name || !this.meta) return out;
    const info = (await this.api.layers()).layers.find((l) => l.name === name);
    const labels = info ? info.labels : [];
    for (const label of labels) {
      out.set(label, await this.api.getLabel(name, label));
    }
    return out;
  }

  get nFrames(): number {
    return this.meta ? this.meta.frames : 1;
  }

  /** Click in a trace panel seeks to the frame mapped from the x pixel. */
  seekFromTraceClick(xPx: number, panelWidthPx: number): number {
    const frame = frameFromTraceX(xPx, panelWidthPx, this.nFrames);
    this.state = seek(this.state, frame, this.nFrames);
    this.emit();
    return frame;
  }

  /** Click on the video places the current label at the clicked position.
   * The write is optimistic; a conflict or validation error rolls back. */
  async clickVideo(x: number, y: number): Promise<boolean> {
    const layer = this.state.primaryLayer;
    if (!layer || !this.meta) return false;
    const label = this.state.label;
    const frame = this.state.frame;
    const traj = this.primaryData.get(label);
    const prev = traj?.points[String(frame)];
    if (traj) traj.points[String(frame)] = [x, y];
    this.emit();
    try {
      await this.api.putPoint(layer, label, frame, x, y, traj?.revision);
      await this.refresh();
      return true;
    } catch (err) {
      if (traj) {
        if (prev) traj.points[String(frame)] = prev;
        else delete traj.points[String(frame)];
      }
      this.lastError = err instanceof Error ? err.message : String(err);
      if (err instanceof ApiError && err.status === 409) {
        await this.refresh();
      } else {
        this.emit();
      }
      return false;
    }
  }

  async requestGuess(): Promise<boolean> {
    const layer = this.state.primaryLayer;
    if (!layer) return false;
    try {
      const got = await this.api.guess(layer, this.state.label, this.state.frame);
      this.state = proposeGuess(this.state, {
        label: this.state.label,
        frame: this.state.frame,
        x: got.x,
        y: got.y,
        status: got.status,
      });
      this.emit();
      return true;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.emit();
      return false;
    }
  }

  /** Confirm turns the provisional marker into a server-visible point. */
  async confirmGuess(): Promise<boolean> {
    const layer = this.state.primaryLayer;
    const { state, guess } = takeGuess(this.state);
    this.state = state;
    if (!layer || !guess) return false;
    try {
      await this.api.putPoint(layer, guess.label, guess.frame, guess.x, guess.y);
      await this.refresh();
      return true;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.emit();
      return false;
    }
  }

  async deleteCurrentPoint(): Promise<void> {
    const layer = this.state.primaryLayer;
    if (!layer) return;
    try {
      await this.api.deletePoint(layer, this.state.label, this.state.frame);
      await this.refresh();
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.emit();
    }
  }

  /** One playback step; returns false once playback has stopped. */
  tick(): boolean {
    const before = this.state;
    this.state = playbackTick(this.state, this.nFrames, this.annotated);
    if (this.state !== before) this.emit();
    return this.state.playing;
  }

  async handleKey(key: string, shift = false): Promise<void> {
    const action = actionForKey(key, shift);
    if (!action) return;
    switch (action.kind) {
      case "step":
        this.state = step(this.state, action.delta, this.nFrames);
        this.emit();
        break;
      case "cycleLabel":
        this.state = cycleLabel(this.state, this.meta?.labels ?? [], action.dir);
        this.emit();
        break;
      case "cyclePrimary":
        this.state = cyclePrimary(this.state, this.layerNames, action.dir);
        await this.refresh();
        break;
      case "cycleOverlay":
        this.state = cycleOverlay(this.state, this.layerNames, action.dir);
        await this.refresh();
        break;
      case "togglePlay":
        this.state = togglePlaying(this.state);
        this.emit();
        break;
      case "togglePauseAtAnnotated":
        this.state = togglePauseAtAnnotated(this.state);
        this.emit();
        break;
      case "toggleTraceStyle":
        this.state = toggleTraceStyle(this.state);
        this.emit();
        break;
      case "guess":
        await this.requestGuess();
        break;
      case "confirmGuess":
        await this.confirmGuess();
        break;
      case "cancelGuess":
        this.state = cancelGuess(this.state);
        this.emit();
        break;
      case "deletePoint":
        await this.deleteCurrentPoint();
        break;
      case "save":
        if (this.state.primaryLayer) {
          try {
            await this.api.save(this.state.primaryLayer);
          } catch (err) {
            this.lastError = err instanceof Error ? err.message : String(err);
            this.emit();
          }
        }
        break;
    }
  }

  statusLine(): string {
    const s = this.state;
    const overlay = s.overlayLayer ?? "none";
    return (
      `Frame ${s.frame}, primary annotation layer: ${s.primaryLayer ?? "none"}, ` +
      `overlay annotation layer: ${overlay}, annotation label ${s.label}`
    );
  }
}
