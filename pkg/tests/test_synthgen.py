from __future__ import annotations

import numpy as np
import pytest

from ustrack import (
    Composed,
    ContractError,
    Shear,
    Sinusoid,
    SynthSpec,
    Translation,
    ValidationError,
    make_speckle,
    render_sequence,
)
from ustrack.synthgen import truth_point


class TestMakeSpeckle:
    def test_same_seed_identical(self):
        spec = SynthSpec(seed=77)
        assert np.array_equal(make_speckle(spec).pixels, make_speckle(spec).pixels)

    def test_large_sigma_near_constant(self):
        spec = SynthSpec(width=64, height=64, seed=1, speckle_sigma=40.0)
        px = make_speckle(spec).pixels
        assert px.max() - px.min() <= 0.05

    def test_different_seeds_differ_widely(self):
        a = make_speckle(SynthSpec(seed=1)).pixels
        b = make_speckle(SynthSpec(seed=2)).pixels
        assert (np.abs(a - b) > 1e-3).mean() >= 0.5

    def test_values_inside_unit_interval(self):
        px = make_speckle(SynthSpec(seed=3, speckle_sigma=0.8)).pixels
        assert px.min() >= 0.0 and px.max() <= 1.0


class TestRenderSequence:
    def test_zero_motion_zero_noise_static(self):
        spec = SynthSpec(frames=5, seed=4)
        seq, truth = render_sequence(spec, {"0": (20.0, 20.0)})
        for f in seq.frames[1:]:
            assert np.array_equal(f.pixels, seq[0].pixels)
        assert all(truth.get("0", t) == (20.0, 20.0) for t in range(5))

    def test_translation_truth_exact(self):
        spec = SynthSpec(width=96, frames=10, seed=5, motion=Translation(1.0, 0.0))
        seq, truth = render_sequence(spec, {"0": (10.0, 30.0)})
        for t in range(10):
            assert truth.get("0", t) == (10.0 + t, 30.0)

    def test_sinusoid_truth_formula(self):
        spec = SynthSpec(width=64, frames=100, fps=50, seed=6,
                         motion=Sinusoid(amplitude=5.0, freq_hz=1.0, axis="x"))
        seq, truth = render_sequence(spec, {"0": (30.0, 30.0)})
        for t in range(100):
            want = 30.0 + 5.0 * np.sin(2 * np.pi * t / 50.0)
            assert truth.get("0", t)[0] == pytest.approx(want, abs=1e-12)
            assert truth.get("0", t)[1] == 30.0

    def test_reproducible_byte_for_byte(self):
        spec = SynthSpec(frames=6, seed=8, sensor_sigma=0.02, motion=Translation(0.5, 0.25))
        a, _ = render_sequence(spec, {"0": (20.0, 20.0)})
        b, _ = render_sequence(spec, {"0": (20.0, 20.0)})
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.pixels, fb.pixels)

    def test_point_exit_names_first_frame(self):
        spec = SynthSpec(width=64, frames=30, seed=9, motion=Translation(2.0, 0.0))
        with pytest.raises(ContractError, match="frame 2"):
            render_sequence(spec, {"p": (60.0, 30.0)})

    def test_warped_frame_matches_direct_sampling(self):
        # translation warp has an exact inverse: frame t equals the base
        # sampled at x - d
        from ustrack.media import sample_bilinear_array
        spec = SynthSpec(width=48, height=40, frames=4, seed=10, motion=Translation(0.7, -0.3))
        seq, _ = render_sequence(spec)
        base = make_speckle(spec).pixels
        gy, gx = np.mgrid[0:40, 0:48].astype(float)
        t = 3
        want = np.clip(sample_bilinear_array(base, gx - 0.7 * t, gy + 0.3 * t), 0, 1)
        assert np.allclose(seq[t].pixels, want, atol=1e-12)

    def test_shear_and_composed_truth(self):
        motion = Composed((Translation(0.2, 0.0), Shear(rate=0.01)))
        spec = SynthSpec(width=96, height=64, frames=5, seed=11, motion=motion)
        seq, truth = render_sequence(spec, {"0": (40.0, 20.0)})
        for t in range(5):
            want_x = 40.0 + 0.2 * t + 0.01 * t * 20.0
            assert truth.get("0", t)[0] == pytest.approx(want_x, abs=1e-12)

    def test_calibration_passed_through(self):
        spec = SynthSpec(frames=2, seed=12, fps=30.0, mm_per_px=(0.1, 0.2))
        seq, _ = render_sequence(spec)
        assert seq.calibration.fps == 30.0
        assert seq.calibration.mm_per_px_x == 0.1


class TestTruthConsistency:
    def test_finite_difference_matches_analytic_velocity(self):
        cases = [
            (Translation(0.8, -0.4), (30.0, 30.0)),
            (Sinusoid(amplitude=5.0, freq_hz=1.0, axis="x"), (30.0, 30.0)),
            (Sinusoid(amplitude=3.0, freq_hz=2.0, axis="y"), (25.0, 35.0)),
            (Composed((Translation(0.1, 0.0), Shear(rate=0.005))), (20.0, 40.0)),
        ]
        h = 1e-4
        for motion, p0 in cases:
            spec = SynthSpec(width=64, height=64, frames=50, fps=50, seed=13, motion=motion)
            for t in (3.0, 17.0, 31.5):
                xp, yp = truth_point(spec, p0, t + h)
                xm, ym = truth_point(spec, p0, t - h)
                fd = ((xp - xm) / (2 * h), (yp - ym) / (2 * h))
                vx, vy = motion.velocity(np.array([p0[0]]), np.array([p0[1]]), t, 50.0)
                assert abs(fd[0] - vx[0]) < 1e-6
                assert abs(fd[1] - vy[0]) < 1e-6


class TestSpecValidation:
    def test_nyquist_guard(self):
        bad = SynthSpec(fps=50, motion=Sinusoid(freq_hz=25.0))
        with pytest.raises(ValidationError):
            render_sequence(bad, {"0": (10.0, 10.0)})

    def test_geometry_guards(self):
        with pytest.raises(ValidationError):
            SynthSpec(width=1)
        with pytest.raises(ValidationError):
            SynthSpec(speckle_sigma=0.0)
        with pytest.raises(ValidationError):
            SynthSpec(sensor_sigma=-0.1)
