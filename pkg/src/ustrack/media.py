"""Image sequence loading, sub-pixel sampling, and pyramid construction.

Frames hold grayscale intensities as float64 in [0, 1], normalized from
8-bit sources at load time. All sampling uses clamp-to-edge borders so the
operations are total over the real plane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import LoadError, StructuralError, ValidationError

# 5-tap binomial blur used between pyramid levels.
_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

# Each pyramid level must retain at least this many pixels per axis.
_MIN_LEVEL_PX = 8


@dataclass(frozen=True)
class Calibration:
    """Physical scale of a sequence: millimeters per pixel and frame rate."""

    mm_per_px_x: float = 1.0
    mm_per_px_y: float = 1.0
    fps: float = 50.0

    def __post_init__(self):
        if self.mm_per_px_x <= 0 or self.mm_per_px_y <= 0 or self.fps <= 0:
            raise ValidationError(
                f"calibration values must be positive, got "
                f"mm_per_px=({self.mm_per_px_x}, {self.mm_per_px_y}), fps={self.fps}"
            )


class Frame:
    """One grayscale frame; intensities are immutable float64 in [0, 1]."""

    __slots__ = ("index", "pixels")

    def __init__(self, index: int, pixels: np.ndarray):
        if index < 0:
            raise ValidationError(f"frame index must be >= 0, got {index}")
        px = np.ascontiguousarray(pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 2 or px.shape[1] < 2:
            raise StructuralError(f"frame {index}: expected 2-D grid of at least 2x2, got shape {px.shape}")
        lo, hi = float(px.min()), float(px.max())
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0.0 or hi > 1.0:
            raise ValidationError(f"frame {index}: intensities outside [0, 1] (min={lo}, max={hi})")
        px.setflags(write=False)
        self.index = index
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.index == other.index
            and np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self):
        return f"Frame(index={self.index}, {self.width}x{self.height})"


@dataclass(frozen=True)
class Pyramid:
    """Coarse-to-fine image stack; level 0 is the original frame."""

    levels: tuple[Frame, ...]

    def __post_init__(self):
        if len(self.levels) < 1:
            raise ValidationError("pyramid needs at least one level")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Levels packed into one 1-D buffer for the tracking kernels.

        Returns (data, offsets, widths, heights) with offsets[k] the start of
        level k inside data.
        """
        datas = [lv.pixels.ravel() for lv in self.levels]
        sizes = [d.size for d in datas]
        off = np.zeros(len(datas), dtype=np.int64)
        off[1:] = np.cumsum(sizes[:-1])
        widths = np.array([lv.width for lv in self.levels], dtype=np.int64)
        heights = np.array([lv.height for lv in self.levels], dtype=np.int64)
        return np.concatenate(datas), off, widths, heights


@dataclass(frozen=True)
class PyramidStack:
    """Flattened pyramids for every frame of a sequence, kernel-ready."""

    data: np.ndarray          # all levels of all frames, concatenated
    offsets: np.ndarray       # (n_frames, n_levels) start index per frame/level
    widths: np.ndarray        # (n_levels,)
    heights: np.ndarray       # (n_levels,)

    @property
    def n_levels(self) -> int:
        return self.widths.shape[0]


class FrameSequence:
    """Ordered, immutable frames plus their calibration."""

    def __init__(self, frames, calibration: Calibration | None = None):
        frames = tuple(frames)
        if not frames:
            raise StructuralError("sequence has no frames")
        w, h = frames[0].width, frames[0].height
        for f in frames:
            if f.width != w or f.height != h:
                raise StructuralError(
                    f"frame {f.index}: dimensions {f.width}x{f.height} differ from first frame {w}x{h}"
                )
        for i, f in enumerate(frames):
            if f.index != i:
                raise StructuralError(f"frame indices must be contiguous from 0, got {f.index} at position {i}")
        self.frames = frames
        self.calibration = calibration or Calibration()
        self._stacks: dict[int, PyramidStack] = {}

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def pyramid_stack(self, levels: int) -> PyramidStack:
        """Build (and cache) flattened pyramids with the effective level count."""
        levels = clamp_levels(self.width, self.height, levels)
        cached = self._stacks.get(levels)
        if cached is not None:
            return cached
        per_frame = [build_pyramid(f, levels) for f in self.frames]
        datas = []
        offsets = np.zeros((len(self.frames), levels), dtype=np.int64)
        pos = 0
        for n, pyr in enumerate(per_frame):
            for k, lv in enumerate(pyr.levels):
                offsets[n, k] = pos
                datas.append(lv.pixels.ravel())
                pos += lv.pixels.size
        widths = np.array([lv.width for lv in per_frame[0].levels], dtype=np.int64)
        heights = np.array([lv.height for lv in per_frame[0].levels], dtype=np.int64)
        stack = PyramidStack(np.concatenate(datas), offsets, widths, heights)
        self._stacks[levels] = stack
        return stack


def clamp_levels(width: int, height: int, levels: int) -> int:
    """Largest level count <= `levels` keeping every level >= 8 px per axis."""
    if levels < 1:
        raise ValidationError(f"level count must be >= 1, got {levels}")
    side = min(width, height)
    max_levels = max(1, int(math.floor(math.log2(side / _MIN_LEVEL_PX))) + 1) if side >= _MIN_LEVEL_PX else 1
    return min(levels, max_levels)


def sample_bilinear(frame: Frame, p) -> float:
    """Bilinear interpolation at sub-pixel point p=(x, y), clamped to the frame."""
    return _sample_array(frame.pixels, float(p[0]), float(p[1]))


def _sample_array(px: np.ndarray, x: float, y: float) -> float:
    h, w = px.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0 = min(int(x), w - 2)
    y0 = min(int(y), h - 2)
    fx = x - x0
    fy = y - y0
    row0 = px[y0, x0] * (1.0 - fx) + px[y0, x0 + 1] * fx
    row1 = px[y0 + 1, x0] * (1.0 - fx) + px[y0 + 1, x0 + 1] * fx
    return row0 * (1.0 - fy) + row1 * fy


def sample_bilinear_array(px: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized clamped bilinear sampling; xs/ys are same-shape coordinate arrays."""
    h, w = px.shape
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(x.astype(np.int64), w - 2)
    y0 = np.minimum(y.astype(np.int64), h - 2)
    fx = x - x0
    fy = y - y0
    r0 = px[y0, x0] * (1.0 - fx) + px[y0, x0 + 1] * fx
    r1 = px[y0 + 1, x0] * (1.0 - fx) + px[y0 + 1, x0 + 1] * fx
    return r0 * (1.0 - fy) + r1 * fy


def gradient(frame: Frame, p) -> tuple[float, float]:
    """Central-difference spatial gradient of the bilinear surface at p."""
    x, y = float(p[0]), float(p[1])
    px = frame.pixels
    gx = 0.5 * (_sample_array(px, x + 1.0, y) - _sample_array(px, x - 1.0, y))
    gy = 0.5 * (_sample_array(px, x, y + 1.0) - _sample_array(px, x, y - 1.0))
    return gx, gy


def blur_decimate(px: np.ndarray) -> np.ndarray:
    """5-tap binomial blur (clamped borders) followed by 2x decimation."""
    sm = correlate1d(px, _BINOMIAL5, axis=0, mode="nearest")
    sm = correlate1d(sm, _BINOMIAL5, axis=1, mode="nearest")
    return np.ascontiguousarray(sm[::2, ::2])


def build_pyramid(frame: Frame, levels: int) -> Pyramid:
    """Pyramid with level 0 = input; requested count is clamped to frame size."""
    levels = clamp_levels(frame.width, frame.height, levels)
    out = [frame]
    px = frame.pixels
    for _ in range(1, levels):
        px = np.clip(blur_decimate(px), 0.0, 1.0)
        out.append(Frame(frame.index, px))
    return Pyramid(tuple(out))


def _load_manifest(path: Path) -> dict:
    mpath = path / "manifest.json"
    if not mpath.exists():
        return {}
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read manifest {mpath}: {exc}") from exc


def _calibration_from_manifest(manifest: dict) -> Calibration:
    mm = manifest.get("mm_per_px", [1.0, 1.0])
    if not (isinstance(mm, (list, tuple)) and len(mm) == 2):
        raise StructuralError(f"manifest mm_per_px must be a pair, got {mm!r}")
    return Calibration(float(mm[0]), float(mm[1]), float(manifest.get("fps", 50.0)))


def open_sequence(path, manifest: dict | None = None) -> FrameSequence:
    """Load a sequence from an image directory or a raw 8-bit luma blob.

    The directory either contains numbered image files (frame_*.png / frame_*.pgm,
    lexicographic order) or a `frames.y8` blob whose manifest declares
    width/height/count. An explicit `manifest` dict overrides manifest.json.
    """
    path = Path(path)
    if not path.is_dir():
        raise LoadError(f"sequence directory not found: {path}")
    if manifest is None:
        manifest = _load_manifest(path)
    cal = _calibration_from_manifest(manifest)

    raw = path / "frames.y8"
    if raw.exists():
        return _open_raw(raw, manifest, cal)

    files = sorted(p for p in path.iterdir() if p.name.startswith("frame_") and p.suffix in (".png", ".pgm"))
    if not files:
        raise LoadError(f"no frame_*.png/.pgm files and no frames.y8 in {path}")
    return _open_images(files, cal)


def _open_images(files, cal: Calibration) -> FrameSequence:
    from PIL import Image, UnidentifiedImageError

    frames = []
    for i, fp in enumerate(files):
        try:
            with Image.open(fp) as img:
                if img.mode != "L":
                    img = img.convert("L")  # Rec.601 luma
                arr = np.asarray(img, dtype=np.float64) / 255.0
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            raise LoadError(f"frame {i} ({fp.name}): {exc}") from exc
        if arr.ndim != 2:
            raise LoadError(f"frame {i} ({fp.name}): not a grayscale image")
        frames.append(Frame(i, arr))
    return FrameSequence(frames, cal)


def _open_raw(raw: Path, manifest: dict, cal: Calibration) -> FrameSequence:
    for key in ("width", "height", "count"):
        if key not in manifest:
            raise StructuralError(f"raw manifest missing required field {key!r}")
    w, h, n = int(manifest["width"]), int(manifest["height"]), int(manifest["count"])
    if w < 2 or h < 2 or n < 1:
        raise StructuralError(f"raw manifest has invalid geometry width={w} height={h} count={n}")
    try:
        blob = raw.read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read {raw}: {exc}") from exc
    if len(blob) != w * h * n:
        raise StructuralError(
            f"{raw.name}: expected {w * h * n} bytes for {n} frames of {w}x{h}, got {len(blob)}"
        )
    cube = np.frombuffer(blob, dtype=np.uint8).reshape(n, h, w).astype(np.float64) / 255.0
    return FrameSequence([Frame(i, cube[i]) for i in range(n)], cal)
