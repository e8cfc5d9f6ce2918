"""Local HTTP service backing the browser annotation UI.

One session serves one frame sequence plus its annotation store. Every
store mutation passes through the session lock (single writer); optimistic
per-layer revision tokens turn stale concurrent edits into 409s instead of
silent clobbers. Long-running filter runs are job resources polled by id.
"""

from __future__ import annotations

import io
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import annotstore
from .errors import ContractError, NotFoundError, UstrackError, ValidationError
from .flow import TrackConfig
from .jitterfilter import FilterConfig, filter_layer
from .media import FrameSequence, open_sequence
from .rstc import RstcConfig

DEFAULT_PORT = 8472


class ConflictError(UstrackError):
    """A mutation carried a stale revision token."""


@dataclass
class Session:
    seq: FrameSequence
    store: annotstore.AnnotationStore
    save_dir: Path
    track_cfg: TrackConfig = field(default_factory=TrackConfig)
    rstc_cfg: RstcConfig = field(default_factory=RstcConfig)
    lock: threading.RLock = field(default_factory=threading.RLock)
    jobs: dict = field(default_factory=dict)
    executor: ThreadPoolExecutor = field(default_factory=lambda: ThreadPoolExecutor(max_workers=1))
    dirty: set = field(default_factory=set)


def build_session(frames_dir, layer_paths=None) -> Session:
    """Open a sequence and auto-load every layer file next to the frames."""
    frames_dir = Path(frames_dir)
    seq = open_sequence(frames_dir)
    store = annotstore.AnnotationStore(len(seq), seq.width, seq.height)
    paths = sorted(frames_dir.glob("*.annot.json"))
    for extra in layer_paths or []:
        extra = Path(extra)
        if extra not in paths:
            paths.append(extra)
    for path in paths:
        layer = annotstore.load_layer(path, width=seq.width, height=seq.height, n_frames=len(seq))
        store.adopt_layer(layer, replace=True)
    return Session(seq=seq, store=store, save_dir=frames_dir)


class PointBody(BaseModel):
    x: float
    y: float
    revision: int | None = None


class LayerCreate(BaseModel):
    name: str


class GuessBody(BaseModel):
    layer: str
    label: str
    frame: int


class InterpolateBody(BaseModel):
    layer: str
    label: str = "all"
    range: tuple[int, int] | None = None
    overwrite: bool = False


class TrimBody(BaseModel):
    layer: str
    expected: list[str]


class CopyBody(BaseModel):
    src: str
    dst: str
    range: tuple[int, int] | None = None
    label: str = "all"


class WindowBody(BaseModel):
    frames: int | None = None
    seconds: float | None = None


class FilterBody(BaseModel):
    layer: str
    window: WindowBody = WindowBody()


class SaveBody(BaseModel):
    layer: str


def create_app(session: Session, static_dir=None) -> FastAPI:
    app = FastAPI(title="ustrack", version="0.1.0", openapi_url="/api/spec",
                  docs_url="/api/docs")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    store = session.store
    seq = session.seq

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValidationError)
    async def _invalid(request: Request, exc: ValidationError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ContractError)
    async def _contract(request: Request, exc: ContractError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @lru_cache(maxsize=256)
    def frame_png(index: int) -> bytes:
        import numpy as np
        from PIL import Image

        img = Image.fromarray(np.round(seq[index].pixels * 255.0).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def check_revision(layer: str, revision: int | None) -> None:
        if revision is not None and revision != store.revisions.get(layer, 0):
            raise ConflictError(
                f"layer {layer!r} is at revision {store.revisions.get(layer, 0)}, "
                f"request was based on {revision}"
            )

    @app.get("/api/meta")
    def meta():
        cal = seq.calibration
        return {"frames": len(seq), "fps": cal.fps, "width": seq.width,
                "height": seq.height, "mm_per_px": [cal.mm_per_px_x, cal.mm_per_px_y],
                "labels": list(store.labels)}

    @app.get("/api/frame/{index}")
    def frame(index: int):
        if not 0 <= index < len(seq):
            raise NotFoundError(f"frame {index} outside [0, {len(seq) - 1}]")
        return Response(content=frame_png(index), media_type="image/png")

    @app.get("/api/layers")
    def layers():
        with session.lock:
            return {"layers": [{"name": name, "revision": store.revisions[name],
                                "labels": sorted(store.layers[name].labels, key=annotstore._label_key)}
                               for name in sorted(store.layers)]}

    @app.post("/api/layers", status_code=201)
    def create_layer(body: LayerCreate):
        with session.lock:
            store.add_layer(body.name)
            return {"name": body.name, "revision": store.revisions[body.name]}

    @app.get("/api/layers/{layer}/labels/{label}")
    def get_label(layer: str, label: str):
        with session.lock:
            pts = store.layer(layer).labels.get(label, {})
            return {"layer": layer, "label": label,
                    "revision": store.revisions[layer],
                    "points": {str(f): [p[0], p[1]] for f, p in sorted(pts.items())}}

    @app.put("/api/layers/{layer}/labels/{label}/frames/{frame}")
    def put_point(layer: str, label: str, frame: int, body: PointBody):
        with session.lock:
            store.layer(layer)
            check_revision(layer, body.revision)
            revision = store.set_point(layer, label, frame, (body.x, body.y))
            session.dirty.add(layer)
            return {"revision": revision}

    @app.delete("/api/layers/{layer}/labels/{label}/frames/{frame}")
    def delete_point(layer: str, label: str, frame: int, revision: int | None = None):
        with session.lock:
            store.layer(layer)
            check_revision(layer, revision)
            new_rev = store.remove_point(layer, label, frame)
            session.dirty.add(layer)
            return {"revision": new_rev}

    @app.get("/api/layers/{layer}/annotated-frames")
    def annotated_frames(layer: str, label: str | None = None):
        with session.lock:
            return {"frames": store.layer(layer).annotated_frames(label)}

    @app.post("/api/ops/guess")
    def op_guess(body: GuessBody):
        with session.lock:
            got = store.guess(seq, body.layer, body.label, body.frame, session.track_cfg)
        return {"x": got.p[0], "y": got.p[1], "status": got.status}

    @app.post("/api/ops/interpolate")
    def op_interpolate(body: InterpolateBody):
        label = None if body.label == "all" else body.label
        lo, hi = body.range if body.range is not None else (0, len(seq) - 1)
        with session.lock:
            written = store.interpolate_gaps(seq, body.layer, label, lo, hi,
                                             session.rstc_cfg, overwrite=body.overwrite)
            session.dirty.add(body.layer)
            return {"modified": written, "revision": store.revisions[body.layer]}

    @app.post("/api/ops/trim")
    def op_trim(body: TrimBody):
        with session.lock:
            removed = store.trim(body.layer, set(body.expected))
            session.dirty.add(body.layer)
            return {"removed": removed, "revision": store.revisions[body.layer]}

    @app.post("/api/ops/copy")
    def op_copy(body: CopyBody):
        label = None if body.label == "all" else body.label
        lo, hi = body.range if body.range is not None else (0, len(seq) - 1)
        with session.lock:
            copied = store.copy_range(body.src, body.dst, label, lo, hi)
            session.dirty.add(body.dst)
            return {"copied": copied, "revision": store.revisions[body.dst]}

    @app.post("/api/ops/filter", status_code=202)
    def op_filter(body: FilterBody):
        with session.lock:
            layer = store.layer(body.layer).copy()
        if body.window.frames is not None:
            cfg = FilterConfig(window_frames=body.window.frames, rstc=session.rstc_cfg)
        elif body.window.seconds is not None:
            cfg = FilterConfig(window_frames=None, window_seconds=body.window.seconds,
                               rstc=session.rstc_cfg)
        else:
            cfg = FilterConfig(window_frames=None, window_seconds=0.6, rstc=session.rstc_cfg)
        cfg.window_for(seq.calibration.fps)  # validate before queueing
        job_id = uuid.uuid4().hex
        session.jobs[job_id] = {"state": "queued", "progress": 0.0, "result": None, "error": None}

        def run():
            job = session.jobs[job_id]
            job["state"] = "running"
            try:
                out = filter_layer(seq, layer, cfg,
                                   progress=lambda frac: job.__setitem__("progress", frac))
                with session.lock:
                    store.adopt_layer(out, replace=True)
                    session.dirty.add(out.name)
                job["result"] = out.name
                job["state"] = "done"
                job["progress"] = 1.0
            except Exception as exc:  # surfaced through the job resource
                job["error"] = str(exc)
                job["state"] = "error"

        session.executor.submit(run)
        return {"job": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_state(job_id: str):
        job = session.jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job {job_id!r}")
        return job

    @app.post("/api/save")
    def save(body: SaveBody):
        with session.lock:
            layer = store.layer(body.layer)
            path = session.save_dir / f"{layer.name}.annot.json"
            annotstore.save_layer(layer, path)
            session.dirty.discard(body.layer)
        return {"path": str(path)}

    if static_dir is None:
        candidate = Path.cwd() / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
