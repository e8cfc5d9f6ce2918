"""Transposed sliding-window filter over fused tracklets.

Every window position [s, s+W-1] anchors one tracklet on the input
trajectory; the filtered value at frame t is the mean of all interior
tracklet estimates covering t. Anchor frames contribute nothing, so a
W-frame window yields W-2 interior estimates per tracklet and fully covered
frames average exactly W-2 values. Frames without coverage (the sequence
ends) pass the input through unchanged.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .annotstore import AnnotationLayer
from .errors import ContractError, ValidationError
from .media import FrameSequence
from .rstc import RstcConfig, fused_track, sigmoid_weights

DEFAULT_WINDOW_SECONDS = 0.6


@dataclass(frozen=True)
class FilterConfig:
    """Window length in frames, or in seconds converted as round(s * fps)."""

    window_frames: int | None = 30
    window_seconds: float | None = None
    rstc: RstcConfig = field(default_factory=RstcConfig)

    def __post_init__(self):
        if self.window_frames is not None and self.window_seconds is not None:
            raise ValidationError("give window_frames or window_seconds, not both")
        if self.window_frames is None and self.window_seconds is None:
            raise ValidationError("one of window_frames / window_seconds is required")
        if self.window_frames is not None and self.window_frames < 3:
            raise ValidationError(f"window_frames must be >= 3, got {self.window_frames}")
        if self.window_seconds is not None and self.window_seconds <= 0:
            raise ValidationError(f"window_seconds must be > 0, got {self.window_seconds}")

    def window_for(self, fps: float) -> int:
        if self.window_frames is not None:
            return self.window_frames
        w = int(round(self.window_seconds * fps))
        if w < 3:
            raise ValidationError(
                f"window of {self.window_seconds} s at {fps} fps gives {w} frames, need >= 3"
            )
        return w


@dataclass(frozen=True)
class FilteredTrajectory:
    points: np.ndarray    # (N, 2)
    coverage: np.ndarray  # (N,) count of interior estimates averaged
    source: str

    def __len__(self) -> int:
        return self.points.shape[0]


def coverage_count(t: int, window: int, n: int) -> int:
    """Number of window placements whose interior contains frame t."""
    if not 0 <= t < n:
        raise ContractError(f"frame {t} outside [0, {n - 1}]")
    if not 3 <= window <= n:
        raise ContractError(f"window must be in [3, {n}], got {window}")
    lo = max(0, t - window + 2)
    hi = min(t - 1, n - window)
    return max(0, hi - lo + 1)


def _dense_input(traj, n: int) -> np.ndarray:
    if isinstance(traj, np.ndarray):
        arr = np.asarray(traj, dtype=np.float64)
        if arr.shape != (n, 2):
            raise ContractError(f"trajectory array must have shape ({n}, 2), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ContractError("trajectory contains non-finite points")
        return arr
    if isinstance(traj, Mapping):
        missing = [t for t in range(n) if t not in traj]
        if missing:
            shown = ", ".join(map(str, missing[:10]))
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            raise ContractError(f"trajectory not dense: missing frames {shown}{more}")
        arr = np.array([[float(traj[t][0]), float(traj[t][1])] for t in range(n)])
        if not np.isfinite(arr).all():
            raise ContractError("trajectory contains non-finite points")
        return arr
    raise ContractError(f"unsupported trajectory type {type(traj).__name__}")


def _worker_count() -> int:
    cap = os.environ.get("USTRACK_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return workers


def filter_trajectory(seq: FrameSequence, traj, cfg: FilterConfig | None = None,
                      progress: Callable[[float], None] | None = None,
                      source: str = "") -> FilteredTrajectory:
    """Average interior estimates of all overlapping tracklets per frame.

    The input must have a point at every frame of the sequence. Frames with
    zero usable coverage (the two sequence ends, or frames where every
    covering tracklet lost track) pass through unchanged, so the first and
    last output points always equal the input exactly.
    """
    cfg = cfg or FilterConfig()
    n = len(seq)
    window = cfg.window_for(seq.calibration.fps)
    if n < window:
        raise ContractError(f"window exceeds sequence length ({window} > {n})")
    xy = _dense_input(traj, n)
    stack = seq.pyramid_stack(cfg.rstc.track.levels)
    starts = range(n - window + 1)

    def one(s: int):
        return fused_track(stack, s, s + window - 1,
                           (xy[s, 0], xy[s, 1]),
                           (xy[s + window - 1, 0], xy[s + window - 1, 1]),
                           cfg.rstc)

    workers = _worker_count()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, starts))
    else:
        results = []
        for i, s in enumerate(starts):
            results.append(one(s))
            if progress is not None and (i % 16 == 0 or i == len(starts) - 1):
                progress((i + 1) / len(starts))

    # Kahan-compensated per-frame sums keep the mean order-insensitive.
    sums = np.zeros((n, 2))
    comp = np.zeros((n, 2))
    counts = np.zeros(n, dtype=np.int64)
    for s, (est, valid) in zip(starts, results):
        sel = valid[1:-1]
        if not sel.any():
            continue
        idx = s + 1 + np.nonzero(sel)[0]
        y = est[1:-1][sel] - comp[idx]
        tot = sums[idx] + y
        comp[idx] = (tot - sums[idx]) - y
        sums[idx] = tot
        counts[idx] += 1

    out = xy.copy()
    covered = counts > 0
    out[covered] = sums[covered] / counts[covered, None]
    if progress is not None:
        progress(1.0)
    return FilteredTrajectory(out, counts, source=source)


def filter_layer(seq: FrameSequence, layer: AnnotationLayer, cfg: FilterConfig | None = None,
                 progress: Callable[[float], None] | None = None) -> AnnotationLayer:
    """Filter every label of a layer; output layer is named `<input>_lkrstc`."""
    cfg = cfg or FilterConfig()
    n = len(seq)
    out = AnnotationLayer(f"{layer.name}_lkrstc")
    labels = sorted(layer.labels)
    for i, lb in enumerate(labels):
        pts = layer.labels[lb]
        try:
            dense = _dense_input(pts, n)
        except ContractError as exc:
            raise ContractError(f"label {lb!r}: {exc}") from None

        def sub(frac, i=i):
            if progress is not None:
                progress((i + frac) / len(labels))

        filt = filter_trajectory(seq, dense, cfg, progress=sub if progress else None, source=lb)
        for t in range(n):
            out.set(lb, t, (filt.points[t, 0], filt.points[t, 1]))
    return out
