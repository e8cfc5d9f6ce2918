"""Synthetic speckle sequences with analytic ground-truth motion.

Frames are a blurred seeded noise texture warped by a smooth displacement
field; requested material points are carried along the same field so every
tracking claim can be tested against an exact truth trajectory. All
randomness flows from one seed through per-frame child generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .annotstore import AnnotationLayer
from .errors import ContractError, ValidationError
from .media import Calibration, Frame, FrameSequence, sample_bilinear_array

# fixed-point iterations for inverting the forward warp
_INVERT_ITERS = 12


class MotionField:
    """Displacement d(p, t) of the material point at reference position p.

    Time is measured in frames; fields that need physical time receive the
    sequence fps. Subclasses implement displacement and its analytic time
    derivative (velocity, px/frame).
    """

    def displacement(self, px: np.ndarray, py: np.ndarray, t: float, fps: float):
        raise NotImplementedError

    def velocity(self, px: np.ndarray, py: np.ndarray, t: float, fps: float):
        raise NotImplementedError


@dataclass(frozen=True)
class Translation(MotionField):
    """Constant velocity in px/frame."""

    vx: float = 0.0
    vy: float = 0.0

    def displacement(self, px, py, t, fps):
        return self.vx * t * np.ones_like(px), self.vy * t * np.ones_like(py)

    def velocity(self, px, py, t, fps):
        return self.vx * np.ones_like(px), self.vy * np.ones_like(py)


@dataclass(frozen=True)
class Sinusoid(MotionField):
    """Whole-field oscillation along one axis: amplitude px at freq_hz."""

    amplitude: float = 5.0
    freq_hz: float = 1.0
    axis: str = "x"

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValidationError(f"axis must be 'x' or 'y', got {self.axis!r}")

    def _phase(self, t, fps):
        if self.freq_hz >= fps / 2:
            raise ValidationError(f"sinusoid frequency {self.freq_hz} Hz >= Nyquist for fps {fps}")
        return 2.0 * math.pi * self.freq_hz * t / fps

    def displacement(self, px, py, t, fps):
        d = self.amplitude * math.sin(self._phase(t, fps))
        zero = np.zeros_like(px)
        return (d + zero, zero) if self.axis == "x" else (zero, d + zero)

    def velocity(self, px, py, t, fps):
        v = self.amplitude * math.cos(self._phase(t, fps)) * 2.0 * math.pi * self.freq_hz / fps
        zero = np.zeros_like(px)
        return (v + zero, zero) if self.axis == "x" else (zero, v + zero)


@dataclass(frozen=True)
class Shear(MotionField):
    """Horizontal displacement growing linearly with y: dx = rate * t * y."""

    rate: float = 0.001

    def displacement(self, px, py, t, fps):
        return self.rate * t * py, np.zeros_like(py)

    def velocity(self, px, py, t, fps):
        return self.rate * py, np.zeros_like(py)


@dataclass(frozen=True)
class Composed(MotionField):
    """Sum of component displacements."""

    parts: tuple[MotionField, ...] = ()

    def displacement(self, px, py, t, fps):
        dx = np.zeros_like(px)
        dy = np.zeros_like(py)
        for part in self.parts:
            ax, ay = part.displacement(px, py, t, fps)
            dx += ax
            dy += ay
        return dx, dy

    def velocity(self, px, py, t, fps):
        vx = np.zeros_like(px)
        vy = np.zeros_like(py)
        for part in self.parts:
            ax, ay = part.velocity(px, py, t, fps)
            vx += ax
            vy += ay
        return vx, vy


@dataclass(frozen=True)
class SynthSpec:
    """Full recipe for one reproducible synthetic sequence."""

    width: int = 64
    height: int = 64
    frames: int = 30
    fps: float = 50.0
    seed: int = 0
    speckle_sigma: float = 1.5
    speckle_amplitude: float = 1.0
    # fixed post-blur contrast stretch about mid-gray; keeps coarse pyramid
    # levels textured enough for the LK eigenvalue gate
    speckle_contrast: float = 3.0
    sensor_sigma: float = 0.0
    motion: MotionField = field(default_factory=Translation)
    mm_per_px: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.width < 2 or self.height < 2 or self.frames < 1:
            raise ValidationError("spec needs width, height >= 2 and frames >= 1")
        if self.speckle_sigma <= 0:
            raise ValidationError(f"speckle_sigma must be > 0, got {self.speckle_sigma}")
        if not 0.0 < self.speckle_amplitude <= 1.0:
            raise ValidationError("speckle_amplitude must be in (0, 1]")
        if self.speckle_contrast <= 0:
            raise ValidationError("speckle_contrast must be > 0")
        if self.sensor_sigma < 0:
            raise ValidationError("sensor_sigma must be >= 0")

    def calibration(self) -> Calibration:
        return Calibration(self.mm_per_px[0], self.mm_per_px[1], self.fps)


def _child_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(n)]


def make_speckle(spec: SynthSpec) -> Frame:
    """Base speckle texture: blurred seeded uniform noise, kept inside [0, 1]."""
    rng = _child_rngs(spec.seed, 1)[0]
    noise = 0.5 + spec.speckle_amplitude * (rng.random((spec.height, spec.width)) - 0.5)
    # circular convolution keeps the texture statistics stationary to the edge
    tex = gaussian_filter(noise, spec.speckle_sigma, mode="wrap")
    tex = 0.5 + spec.speckle_contrast * (tex - 0.5)
    return Frame(0, np.clip(tex, 0.0, 1.0))


def _invert_warp(field: MotionField, gx: np.ndarray, gy: np.ndarray, t: float, fps: float):
    """Solve x + d(x, t) = g by fixed point; exact for space-invariant fields."""
    sx = gx.copy()
    sy = gy.copy()
    for _ in range(_INVERT_ITERS):
        dx, dy = field.displacement(sx, sy, t, fps)
        nx = gx - dx
        ny = gy - dy
        if np.allclose(nx, sx, atol=1e-12) and np.allclose(ny, sy, atol=1e-12):
            sx, sy = nx, ny
            break
        sx, sy = nx, ny
    return sx, sy


def render_sequence(spec: SynthSpec, points: dict[str, tuple[float, float]] | None = None,
                    layer_name: str = "truth") -> tuple[FrameSequence, AnnotationLayer]:
    """Render the warped sequence plus the exact trajectory of each point.

    Frame t samples the base texture at the inverse-warped grid; the truth
    for a material point P is P + d(P, t). A point leaving the frame bounds
    raises, naming the first offending frame.
    """
    points = points or {}
    base = make_speckle(spec).pixels
    h, w, n = spec.height, spec.width, spec.frames
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    noise_rngs = _child_rngs(spec.seed, n + 1)[1:]

    frames = []
    for t in range(n):
        sx, sy = _invert_warp(spec.motion, gx, gy, float(t), spec.fps)
        img = sample_bilinear_array(base, sx, sy)
        if spec.sensor_sigma > 0:
            img = img + noise_rngs[t].normal(0.0, spec.sensor_sigma, size=img.shape)
        frames.append(Frame(t, np.clip(img, 0.0, 1.0)))

    layer = AnnotationLayer(layer_name)
    for label, (x0, y0) in points.items():
        x0a = np.array([float(x0)])
        y0a = np.array([float(y0)])
        for t in range(n):
            dx, dy = spec.motion.displacement(x0a, y0a, float(t), spec.fps)
            x, y = float(x0 + dx[0]), float(y0 + dy[0])
            if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
                raise ContractError(
                    f"point {label!r} leaves frame bounds at frame {t}: ({x:.2f}, {y:.2f})"
                )
            layer.set(label, t, (x, y))
    return FrameSequence(frames, spec.calibration()), layer


def truth_point(spec: SynthSpec, p0: tuple[float, float], t: float) -> tuple[float, float]:
    """Analytic position of the material point p0 at (possibly fractional) time t."""
    x0 = np.array([float(p0[0])])
    y0 = np.array([float(p0[1])])
    dx, dy = spec.motion.displacement(x0, y0, float(t), spec.fps)
    return float(p0[0] + dx[0]), float(p0[1] + dy[0])
