from __future__ import annotations

import numpy as np
import pytest

from ustrack import (
    AnnotationLayer,
    Calibration,
    ContractError,
    FilterConfig,
    Frame,
    FrameSequence,
    RstcConfig,
    Sinusoid,
    SynthSpec,
    TrackConfig,
    Translation,
    coverage_count,
    filter_layer,
    filter_trajectory,
    render_sequence,
    rmse,
    rstc_tracklet,
)

FAST_CFG = FilterConfig(window_frames=10, rstc=RstcConfig(track=TrackConfig(win=13, levels=2)))


def brute_force_filter(seq, xy, cfg: FilterConfig) -> np.ndarray:
    """Materialize every tracklet via the public API and average per frame."""
    n = len(seq)
    window = cfg.window_for(seq.calibration.fps)
    per_frame = [[] for _ in range(n)]
    for s in range(n - window + 1):
        tk = rstc_tracklet(seq, s, s + window - 1,
                           (xy[s, 0], xy[s, 1]),
                           (xy[s + window - 1, 0], xy[s + window - 1, 1]),
                           cfg.rstc)
        for k in range(1, window - 1):
            if tk.interior_valid[k]:
                per_frame[s + k].append(tk.estimates[k])
    out = xy.copy()
    for t in range(n):
        if per_frame[t]:
            out[t] = np.mean(per_frame[t], axis=0)
    return out


def coverage_by_enumeration(t, window, n):
    return sum(1 for s in range(n - window + 1) if s + 1 <= t <= s + window - 2)


class TestCoverageCount:
    def test_worked_example(self):
        assert coverage_count(50, 30, 100) == 28

    def test_frame_zero_never_interior(self):
        for window in (3, 10, 30):
            assert coverage_count(0, window, 100) == 0

    def test_frame_one_single_window(self):
        assert coverage_count(1, 30, 100) == 1

    def test_matches_enumeration(self):
        for n, window in [(20, 3), (40, 10), (100, 30), (30, 30)]:
            for t in range(n):
                assert coverage_count(t, window, n) == coverage_by_enumeration(t, window, n)

    def test_preconditions(self):
        with pytest.raises(ContractError):
            coverage_count(-1, 10, 100)
        with pytest.raises(ContractError):
            coverage_count(5, 2, 100)
        with pytest.raises(ContractError):
            coverage_count(5, 101, 100)


@pytest.fixture(scope="module")
def static40():
    from ustrack import make_speckle

    px = make_speckle(SynthSpec(width=48, height=48, seed=21)).pixels
    return FrameSequence([Frame(i, px) for i in range(40)], Calibration())


class TestFilterTrajectory:
    def test_static_constant_input_identity(self, static40):
        xy = np.tile([24.0, 20.0], (40, 1))
        out = filter_trajectory(static40, xy, FAST_CFG)
        assert np.array_equal(out.points, xy)
        want_cov = [coverage_count(t, 10, 40) for t in range(40)]
        assert out.coverage.tolist() == want_cov

    def test_spike_matches_brute_force(self, static40):
        xy = np.tile([24.0, 20.0], (40, 1))
        xy[17] = [29.0, 15.0]
        got = filter_trajectory(static40, xy, FAST_CFG)
        want = brute_force_filter(static40, xy, FAST_CFG)
        assert np.allclose(got.points, want, atol=1e-9)
        # spike is pulled toward consensus of unspiked tracklets
        assert abs(got.points[17, 0] - 24.0) < 1.0
        assert abs(xy[17, 0] - 24.0) == 5.0

    def test_oracle_equivalence_noisy_motion(self):
        spec = SynthSpec(width=64, height=48, frames=60, fps=50, seed=33,
                         motion=Translation(0.5, 0.0))
        seq, truth = render_sequence(spec, {"0": (16.0, 24.0)})
        true_xy = np.array([truth.get("0", t) for t in range(60)])
        noisy = true_xy + np.random.default_rng(7).normal(0, 1.0, true_xy.shape)
        noisy = np.clip(noisy, 0, 47)
        got = filter_trajectory(seq, noisy, FAST_CFG)
        want = brute_force_filter(seq, noisy, FAST_CFG)
        assert np.allclose(got.points, want, atol=1e-9)

    def test_noise_reduction_on_sinusoid(self):
        spec = SynthSpec(width=64, height=48, frames=120, fps=50, seed=13,
                         motion=Sinusoid(amplitude=4.0, freq_hz=1.0, axis="x"))
        seq, truth = render_sequence(spec, {"0": (30.0, 24.0)})
        true_xy = np.array([truth.get("0", t) for t in range(120)])
        noisy = true_xy + np.random.default_rng(3).normal(0, 1.0, true_xy.shape)
        cfg = FilterConfig(window_frames=30, rstc=RstcConfig(track=TrackConfig(win=15, levels=2)))
        out = filter_trajectory(seq, noisy, cfg)
        assert rmse(out.points, true_xy) < rmse(noisy, true_xy)

    def test_endpoints_pass_through_exactly(self, static40):
        rng = np.random.default_rng(5)
        xy = np.tile([24.0, 20.0], (40, 1)) + rng.normal(0, 2.0, (40, 2))
        out = filter_trajectory(static40, xy, FAST_CFG)
        assert np.array_equal(out.points[0], xy[0])
        assert np.array_equal(out.points[-1], xy[-1])
        assert out.coverage[0] == 0 and out.coverage[-1] == 0

    def test_all_tracks_lost_passes_input_through(self):
        const = np.full((32, 32), 0.5)
        seq = FrameSequence([Frame(i, const) for i in range(20)], Calibration())
        rng = np.random.default_rng(6)
        xy = np.tile([16.0, 16.0], (20, 1)) + rng.normal(0, 1.0, (20, 2))
        out = filter_trajectory(seq, xy, FAST_CFG)
        assert np.array_equal(out.points, xy)
        assert (out.coverage == 0).all()

    def test_sparse_input_rejected_naming_frames(self, static40):
        traj = {t: (24.0, 20.0) for t in range(40) if t != 7}
        with pytest.raises(ContractError, match="missing frames 7"):
            filter_trajectory(static40, traj, FAST_CFG)

    def test_window_longer_than_sequence_rejected(self, static40):
        with pytest.raises(ContractError, match="window exceeds sequence length"):
            filter_trajectory(static40, np.tile([24.0, 20.0], (40, 1)),
                              FilterConfig(window_frames=41))

    def test_mapping_input_accepted(self, static40):
        traj = {t: (24.0, 20.0) for t in range(40)}
        out = filter_trajectory(static40, traj, FAST_CFG)
        assert np.allclose(out.points, [24.0, 20.0], atol=0)

    def test_permutation_safety_against_shuffled_mean(self, static40):
        rng = np.random.default_rng(8)
        xy = np.tile([24.0, 20.0], (40, 1)) + rng.normal(0, 1.5, (40, 2))
        got = filter_trajectory(static40, xy, FAST_CFG)
        window = 10
        per_frame = [[] for _ in range(40)]
        for s in range(40 - window + 1):
            tk = rstc_tracklet(static40, s, s + window - 1,
                               (xy[s, 0], xy[s, 1]), (xy[s + window - 1, 0], xy[s + window - 1, 1]),
                               FAST_CFG.rstc)
            for k in range(1, window - 1):
                if tk.interior_valid[k]:
                    per_frame[s + k].append(tk.estimates[k])
        for t in range(40):
            if per_frame[t]:
                order = rng.permutation(len(per_frame[t]))
                shuffled_mean = np.mean([per_frame[t][i] for i in order], axis=0)
                assert np.allclose(got.points[t], shuffled_mean, atol=1e-9)


class TestFilterConfig:
    def test_seconds_convert_by_rounding(self):
        assert FilterConfig(window_frames=None, window_seconds=0.6).window_for(50.0) == 30
        assert FilterConfig(window_frames=None, window_seconds=0.6).window_for(30.0) == 18
        assert FilterConfig(window_frames=None, window_seconds=0.25).window_for(50.0) == 12

    def test_mutual_exclusion_and_bounds(self):
        with pytest.raises(Exception):
            FilterConfig(window_frames=30, window_seconds=0.6)
        with pytest.raises(Exception):
            FilterConfig(window_frames=None, window_seconds=None)
        with pytest.raises(Exception):
            FilterConfig(window_frames=2)


class TestFilterLayer:
    def test_empty_layer(self, static40):
        out = filter_layer(static40, AnnotationLayer("in"), FAST_CFG)
        assert out.name == "in_lkrstc"
        assert out.labels == {}

    def test_static_constant_layer_identity(self, static40):
        layer = AnnotationLayer("model")
        for t in range(40):
            layer.set("0", t, (24.0, 20.0))
        out = filter_layer(static40, layer, FAST_CFG)
        assert out.name == "model_lkrstc"
        assert all(out.get("0", t) == (24.0, 20.0) for t in range(40))

    def test_two_labels_filter_independently(self, static40):
        rng = np.random.default_rng(9)
        layer = AnnotationLayer("m")
        for t in range(40):
            layer.set("0", t, (24.0 + rng.normal(0, 1), 20.0 + rng.normal(0, 1)))
            layer.set("1", t, (30.0 + rng.normal(0, 1), 28.0 + rng.normal(0, 1)))
        both = filter_layer(static40, layer, FAST_CFG)
        for lb in ("0", "1"):
            single = AnnotationLayer("m")
            single.labels[lb] = dict(layer.labels[lb])
            alone = filter_layer(static40, single, FAST_CFG)
            assert alone.labels[lb] == both.labels[lb]

    def test_sparse_label_reported(self, static40):
        layer = AnnotationLayer("m")
        for t in range(0, 40, 2):
            layer.set("3", t, (24.0, 20.0))
        with pytest.raises(ContractError, match="label '3'"):
            filter_layer(static40, layer, FAST_CFG)
