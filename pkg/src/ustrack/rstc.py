"""Bidirectional tracklets fused with a sigmoid weight.

A tracklet tracks a point forward from anchor frame `a` and backward from
anchor frame `b`, then blends the two trajectories with a weight that
transitions preference from the forward track to the reverse track across
the span. The weight is affinely rescaled so the anchors are reproduced
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ValidationError
from .flow import TrackConfig, chain_on_stack
from .media import FrameSequence, PyramidStack


@dataclass(frozen=True)
class RstcConfig:
    alpha: float = 10.0
    track: TrackConfig = field(default_factory=TrackConfig)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class Tracklet:
    """Fused estimates for every frame in [a, b]; anchors are exact."""

    a: int
    b: int
    pa: tuple[float, float]
    pb: tuple[float, float]
    estimates: np.ndarray       # (b - a + 1, 2)
    interior_valid: np.ndarray  # (b - a + 1,) bool: both directional tracks ok

    def __len__(self) -> int:
        return self.b - self.a + 1


def sigmoid_weights(length: int, alpha: float) -> np.ndarray:
    """Strictly decreasing forward-track weights over `length` frames.

    A logistic in normalized span position, rescaled so w[0] = 1 and
    w[-1] = 0 exactly; the vector is symmetrized so w[k] + w[L-1-k] == 1
    holds exactly in floating point.
    """
    if length < 2:
        raise ContractError(f"weight vector needs length >= 2, got {length}")
    if alpha <= 0:
        raise ValidationError(f"alpha must be > 0, got {alpha}")
    s = np.arange(length, dtype=np.float64) / (length - 1)
    raw = 1.0 / (1.0 + np.exp(alpha * (s - 0.5)))
    w = (raw - raw[-1]) / (raw[0] - raw[-1])
    # logistic symmetry about the midpoint, enforced exactly
    half = length // 2
    w[length - 1 - np.arange(half)] = 1.0 - w[:half]
    if length % 2 == 1:
        w[half] = 0.5
    w[0] = 1.0
    w[-1] = 0.0
    return w


def fused_track(stack: PyramidStack, a: int, b: int, pa, pb,
                cfg: RstcConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fused estimates and per-frame validity over [a, b] on a packed stack.

    Shared by `rstc_tracklet` and the sliding-window filter so both produce
    bit-identical tracklets.
    """
    length = b - a + 1
    w = sigmoid_weights(length, cfg.alpha)
    f_xy, f_ok, _ = chain_on_stack(stack, a, b, pa, cfg.track)
    r_xy, r_ok, _ = chain_on_stack(stack, b, a, pb, cfg.track)
    r_xy = r_xy[::-1]
    r_ok = r_ok[::-1]
    est = w[:, None] * f_xy + (1.0 - w)[:, None] * r_xy
    est[0, 0] = float(pa[0])
    est[0, 1] = float(pa[1])
    est[-1, 0] = float(pb[0])
    est[-1, 1] = float(pb[1])
    valid = f_ok & r_ok
    return est, valid


def rstc_tracklet(seq: FrameSequence, a: int, b: int, pa, pb,
                  cfg: RstcConfig | None = None) -> Tracklet:
    """Track forward from (a, pa) and backward from (b, pb), sigmoid-fused.

    Endpoints equal the anchors exactly. Frames where either directional
    track was lost are flagged invalid; their estimates degrade to the
    weighted blend of the frozen tracks.
    """
    cfg = cfg or RstcConfig()
    n = len(seq)
    if not (0 <= a < b <= n - 1):
        raise ContractError(f"need 0 <= a < b <= {n - 1}, got a={a}, b={b}")
    stack = seq.pyramid_stack(cfg.track.levels)
    est, valid = fused_track(stack, a, b, pa, pb, cfg)
    return Tracklet(a, b, (float(pa[0]), float(pa[1])), (float(pb[0]), float(pb[1])), est, valid)
