"""Evaluation primitives: RMSE, Welch spectra, zero-phase band filters.

The PSD estimator and filter family are fixed here (Hann/50% Welch,
4th-order Butterworth applied forward and backward) and recorded in the
spectrum metadata so results are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import signal

from .errors import ContractError, ValidationError
from .media import Calibration

_BUTTER_ORDER = 4


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray   # Hz, 0 .. fps/2
    power: np.ndarray   # one-sided density
    meta: dict

    def band_mean(self, lo: float, hi: float) -> float:
        """Mean power density over [lo, hi] Hz."""
        sel = (self.freqs >= lo) & (self.freqs <= hi)
        if not sel.any():
            raise ContractError(f"no frequency bins inside [{lo}, {hi}] Hz")
        return float(self.power[sel].mean())

    def power_at(self, f: float) -> float:
        """Power density at the bin nearest f."""
        return float(self.power[int(np.argmin(np.abs(self.freqs - f)))])


def _as_points(traj) -> dict[int, tuple[float, float]]:
    if isinstance(traj, Mapping):
        return {int(f): (float(p[0]), float(p[1])) for f, p in traj.items()}
    arr = np.asarray(traj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ContractError(f"trajectory must be a frame->point map or an (N, 2) array, got shape {arr.shape}")
    return {i: (float(arr[i, 0]), float(arr[i, 1])) for i in range(arr.shape[0])}


def rmse(traj_a, traj_b, cal: Calibration | None = None) -> float:
    """Root mean square mm distance over the common frame support."""
    cal = cal or Calibration()
    a = _as_points(traj_a)
    b = _as_points(traj_b)
    common = sorted(a.keys() & b.keys())
    if not common:
        raise ContractError("trajectories share no frames")
    sq = 0.0
    for f in common:
        dx = (a[f][0] - b[f][0]) * cal.mm_per_px_x
        dy = (a[f][1] - b[f][1]) * cal.mm_per_px_y
        sq += dx * dx + dy * dy
    return math.sqrt(sq / len(common))


def welch_segment(length: int) -> int:
    """Segment length: min(256, largest power of two <= length/2)."""
    if length < 4:
        raise ContractError(f"series too short for a spectrum: {length} samples")
    return min(256, 2 ** int(math.floor(math.log2(length / 2))))


def psd(series, fps: float) -> Spectrum:
    """One-sided Welch density: Hann window, 50% overlap, per-segment mean detrend."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"psd expects a 1-D series, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ContractError("psd input contains non-finite values")
    seg = welch_segment(x.size)
    freqs, power = signal.welch(
        x, fs=fps, window="hann", nperseg=seg, noverlap=seg // 2,
        detrend="constant", return_onesided=True, scaling="density",
    )
    meta = {"segment": seg, "window": "hann", "overlap": 0.5,
            "detrend": "constant", "fps": fps, "n": int(x.size)}
    return Spectrum(freqs, power, meta)


def _butter_sos(fps: float, kind: str, cutoff: float):
    if kind not in ("lowpass", "highpass"):
        raise ValidationError(f"kind must be 'lowpass' or 'highpass', got {kind!r}")
    if not 0.0 < cutoff < fps / 2:
        raise ValidationError(f"cutoff must be in (0, {fps / 2}) Hz, got {cutoff}")
    return signal.butter(_BUTTER_ORDER, cutoff, btype=kind, fs=fps, output="sos")


def band_filter(series, fps: float, kind: str, cutoff: float) -> np.ndarray:
    """4th-order Butterworth applied forward then backward (zero phase)."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"band_filter expects a 1-D series, got shape {x.shape}")
    sos = _butter_sos(fps, kind, cutoff)
    padlen = 3 * _BUTTER_ORDER
    if x.size <= padlen:
        raise ContractError(f"series too short to filter: {x.size} <= {padlen} samples")
    return signal.sosfiltfilt(sos, x, padtype="even", padlen=padlen)


def band_gain(fps: float, kind: str, cutoff: float, f: float) -> float:
    """Amplitude gain of the zero-phase cascade at frequency f."""
    sos = _butter_sos(fps, kind, cutoff)
    _, h = signal.sosfreqz(sos, worN=[2 * math.pi * f / fps])
    return float(np.abs(h[0]) ** 2)


def jitter_metric(traj, fps: float, cal: Calibration | None = None,
                  cutoff: float = 1.5) -> float:
    """RMS of the high-pass-filtered position, combined over x and y, in mm.

    Quantifies high-frequency frame-to-frame noise; slow motion below the
    cutoff contributes nothing.
    """
    cal = cal or Calibration()
    pts = _as_points(traj)
    frames = sorted(pts)
    if frames != list(range(frames[0], frames[0] + len(frames))):
        raise ContractError("jitter metric needs a dense trajectory")
    x = np.array([pts[f][0] for f in frames]) * cal.mm_per_px_x
    y = np.array([pts[f][1] for f in frames]) * cal.mm_per_px_y
    hx = band_filter(x, fps, "highpass", cutoff)
    hy = band_filter(y, fps, "highpass", cutoff)
    return math.sqrt(float(np.mean(hx ** 2)) + float(np.mean(hy ** 2)))
