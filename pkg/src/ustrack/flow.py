"""Pyramidal Lucas-Kanade sparse optical flow.

`lk_step` refines one point between two frames at a single scale,
`pyr_track` runs the coarse-to-fine cascade, and `track_range` chains
refinements across a frame range in either temporal direction. Failed
points are frozen at their last valid estimate and flagged, so callers
always receive dense arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractError, ValidationError
from .media import Frame, FrameSequence, Pyramid, PyramidStack

OK = "ok"
LOST = "lost"


@dataclass(frozen=True)
class TrackConfig:
    """Lucas-Kanade parameters; defaults follow the common sparse setup."""

    win: int = 21
    levels: int = 3
    max_iters: int = 30
    eps: float = 0.01
    min_eig: float = 1e-4

    def __post_init__(self):
        if self.win < 3 or self.win % 2 == 0:
            raise ValidationError(f"win must be odd and >= 3, got {self.win}")
        if self.levels < 1:
            raise ValidationError(f"levels must be >= 1, got {self.levels}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.eps <= 0:
            raise ValidationError(f"eps must be > 0, got {self.eps}")
        if self.min_eig < 0:
            raise ValidationError(f"min_eig must be >= 0, got {self.min_eig}")


@dataclass(frozen=True)
class TrackedPoint:
    p: tuple[float, float]
    status: str
    residual: float

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass(frozen=True)
class TrackSegment:
    """Per-frame estimates ordered from `start` to `stop` (both inclusive)."""

    start: int
    stop: int
    points: np.ndarray    # (K+1, 2)
    ok: np.ndarray        # (K+1,) bool
    residuals: np.ndarray

    @property
    def direction(self) -> int:
        return 1 if self.stop >= self.start else -1

    def frames(self) -> range:
        return range(self.start, self.stop + self.direction, self.direction)

    def point_at(self, frame: int) -> tuple[float, float]:
        k = (frame - self.start) * self.direction
        if k < 0 or k >= self.points.shape[0]:
            raise ContractError(f"frame {frame} outside segment [{self.start}, {self.stop}]")
        return float(self.points[k, 0]), float(self.points[k, 1])


def lk_step(prev: Frame, nxt: Frame, p0, guess, cfg: TrackConfig | None = None) -> TrackedPoint:
    """One single-level Gauss-Newton refinement of p0 from `prev` into `nxt`."""
    cfg = cfg or TrackConfig()
    if prev.pixels.shape != nxt.pixels.shape:
        raise ContractError(
            f"frame dimensions differ: {prev.pixels.shape} vs {nxt.pixels.shape}"
        )
    x, y, ok, res = _kernels.lk_step_kernel(
        prev.pixels, nxt.pixels, float(p0[0]), float(p0[1]),
        float(guess[0]), float(guess[1]),
        cfg.win, cfg.max_iters, cfg.eps, cfg.min_eig,
    )
    return TrackedPoint((x, y), OK if ok else LOST, res)


def pyr_track(prev_pyr: Pyramid, next_pyr: Pyramid, p0, cfg: TrackConfig | None = None) -> TrackedPoint:
    """Coarse-to-fine tracking of p0 between two pyramids of equal shape."""
    cfg = cfg or TrackConfig()
    if prev_pyr.n_levels != next_pyr.n_levels:
        raise ContractError(
            f"pyramid level counts differ: {prev_pyr.n_levels} vs {next_pyr.n_levels}"
        )
    base_a, base_b = prev_pyr.levels[0], next_pyr.levels[0]
    if base_a.pixels.shape != base_b.pixels.shape:
        raise ContractError(
            f"pyramid base dimensions differ: {base_a.pixels.shape} vs {base_b.pixels.shape}"
        )
    data_a, off_a, widths, heights = prev_pyr.flat()
    data_b, off_b, _, _ = next_pyr.flat()
    x, y, ok, res = _kernels.pyr_track_kernel(
        data_a, off_a, data_b, off_b, widths, heights,
        float(p0[0]), float(p0[1]),
        cfg.win, cfg.max_iters, cfg.eps, cfg.min_eig,
    )
    return TrackedPoint((x, y), OK if ok else LOST, res)


def chain_on_stack(stack: PyramidStack, f0: int, f1: int, p_start,
                   cfg: TrackConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frame-by-frame chain over a packed pyramid stack; arrays run f0 -> f1."""
    n = abs(f1 - f0)
    out_xy = np.empty((n + 1, 2), dtype=np.float64)
    out_ok = np.empty(n + 1, dtype=np.bool_)
    out_res = np.empty(n + 1, dtype=np.float64)
    _kernels.chain_kernel(
        stack.data, stack.offsets, stack.widths, stack.heights,
        f0, f1, float(p_start[0]), float(p_start[1]),
        cfg.win, cfg.max_iters, cfg.eps, cfg.min_eig,
        out_xy, out_ok, out_res,
    )
    return out_xy, out_ok, out_res


def track_range(seq: FrameSequence, p_start, from_frame: int, to_frame: int,
                cfg: TrackConfig | None = None) -> TrackSegment:
    """Chain pyramidal steps from `from_frame` toward `to_frame` (either direction).

    Each step seeds from the previous estimate. After a lost step, remaining
    frames carry the last valid estimate with ok=False.
    """
    cfg = cfg or TrackConfig()
    n = len(seq)
    if from_frame == to_frame:
        raise ContractError("track_range requires from_frame != to_frame")
    for f in (from_frame, to_frame):
        if not 0 <= f < n:
            raise ContractError(f"frame {f} outside sequence [0, {n - 1}]")
    stack = seq.pyramid_stack(cfg.levels)
    xy, ok, res = chain_on_stack(stack, from_frame, to_frame, p_start, cfg)
    return TrackSegment(from_frame, to_frame, xy, ok, res)
