/** Typed client for the annotation service's JSON API. */

export interface Meta {
  frames: number;
  fps: number;
  width: number;
  height: number;
  mm_per_px: [number, number];
  labels: string[];
}

export interface LayerInfo {
  name: string;
  revision: number;
  labels: string[];
}

export interface LabelTrajectory {
  layer: string;
  label: string;
  revision: number;
  /** frame index (as decimal string) -> [x, y] */
  points: Record<string, [number, number]>;
}

export interface GuessResult {
  x: number;
  y: number;
  status: "ok" | "lost";
}

export interface JobState {
  state: "queued" | "running" | "done" | "error";
  progress: number;
  result: string | null;
  error: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function check<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: unknown };
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  frameUrl(index: number): string {
    return `${this.base}/api/frame/${index}`;
  }

  meta(): Promise<Meta> {
    return fetch(`${this.base}/api/meta`).then((r) => check<Meta>(r));
  }

  layers(): Promise<{ layers: LayerInfo[] }> {
    return fetch(`${this.base}/api/layers`).then((r) => check<{ layers: LayerInfo[] }>(r));
  }

  createLayer(name: string): Promise<{ name: string; revision: number }> {
    return fetch(`${this.base}/api/layers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name }),
    }).then((r) => check<{ name: string; revision: number }>(r));
  }

  getLabel(layer: string, label: string): Promise<LabelTrajectory> {
    return fetch(`${this.base}/api/layers/${enc(layer)}/labels/${enc(label)}`).then((r) =>
      check<LabelTrajectory>(r),
    );
  }

  putPoint(
    layer: string,
    label: string,
    frame: number,
    x: number,
    y: number,
    revision?: number,
  ): Promise<{ revision: number }> {
    return fetch(`${this.base}/api/layers/${enc(layer)}/labels/${enc(label)}/frames/${frame}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(revision === undefined ? { x, y } : { x, y, revision }),
    }).then((r) => check<{ revision: number }>(r));
  }

  deletePoint(layer: string, label: string, frame: number): Promise<{ revision: number }> {
    return fetch(`${this.base}/api/layers/${enc(layer)}/labels/${enc(label)}/frames/${frame}`, {
      method: "DELETE",
    }).then((r) => check<{ revision: number }>(r));
  }

  annotatedFrames(layer: string, label?: string): Promise<{ frames: number[] }> {
    const query = label === undefined ? "" : `?label=${enc(label)}`;
    return fetch(`${this.base}/api/layers/${enc(layer)}/annotated-frames${query}`).then((r) =>
      check<{ frames: number[] }>(r),
    );
  }

  guess(layer: string, label: string, frame: number): Promise<GuessResult> {
    return this.post<GuessResult>("/api/ops/guess", { layer, label, frame });
  }

  interpolate(
    layer: string,
    label: string,
    range?: [number, number],
  ): Promise<{ modified: number; revision: number }> {
    return this.post("/api/ops/interpolate", { layer, label, range });
  }

  trim(layer: string, expected: string[]): Promise<{ removed: number[]; revision: number }> {
    return this.post("/api/ops/trim", { layer, expected });
  }

  copy(
    src: string,
    dst: string,
    label = "all",
    range?: [number, number],
  ): Promise<{ copied: number; revision: number }> {
    return this.post("/api/ops/copy", { src, dst, label, range });
  }

  filter(layer: string, windowFrames?: number, windowSeconds?: number): Promise<{ job: string }> {
    return this.post("/api/ops/filter", {
      layer,
      window: { frames: windowFrames ?? null, seconds: windowSeconds ?? null },
    });
  }

  job(id: string): Promise<JobState> {
    return fetch(`${this.base}/api/jobs/${enc(id)}`).then((r) => check<JobState>(r));
  }

  save(layer: string): Promise<{ path: string }> {
    return this.post("/api/save", { layer });
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return fetch(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => check<T>(r));
  }
}

function enc(part: string): string {
  return encodeURIComponent(part);
}
