from __future__ import annotations

import numpy as np
import pytest

from ustrack import Calibration, Frame, FrameSequence, SynthSpec, Translation, make_speckle, render_sequence


def frame_from(arr, index=0) -> Frame:
    return Frame(index, np.asarray(arr, dtype=np.float64))


@pytest.fixture(scope="session")
def speckle64() -> Frame:
    return make_speckle(SynthSpec(width=64, height=64, seed=42))


@pytest.fixture(scope="session")
def static_seq() -> FrameSequence:
    """10 identical speckle frames."""
    base = make_speckle(SynthSpec(width=64, height=64, seed=42)).pixels
    return FrameSequence([Frame(i, base) for i in range(10)], Calibration())


@pytest.fixture(scope="session")
def translating():
    """30 frames translating (1, 0) px/frame, with exact truth for one point."""
    spec = SynthSpec(width=96, height=64, frames=30, fps=50, seed=5, motion=Translation(1.0, 0.0))
    seq, truth = render_sequence(spec, {"0": (20.0, 32.0)})
    return seq, truth
