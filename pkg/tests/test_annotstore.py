from __future__ import annotations

import numpy as np
import pytest

from ustrack import (
    AnnotationLayer,
    AnnotationStore,
    ContractError,
    NotFoundError,
    ParseError,
    SchemaVersionError,
    ValidationError,
    export_csv,
    import_csv,
    load_layer,
    save_layer,
)
from ustrack.annotstore import copy_range, guess, interpolate_gaps, trim


def layer_with(points: dict[str, dict[int, tuple[float, float]]], name="L") -> AnnotationLayer:
    layer = AnnotationLayer(name)
    for lb, pts in points.items():
        for f, p in pts.items():
            layer.set(lb, f, p)
    return layer


def random_layer(rng, n_labels=4, n_frames=50, name="rand") -> AnnotationLayer:
    layer = AnnotationLayer(name)
    for lb in range(n_labels):
        frames = rng.choice(n_frames, size=rng.integers(1, 20), replace=False)
        for f in frames:
            layer.set(str(lb), int(f), (float(rng.uniform(0, 63)), float(rng.uniform(0, 63))))
    return layer


class TestStoreCrud:
    def make_store(self):
        store = AnnotationStore(n_frames=100, width=64, height=64, labels=("0", "1", "2"))
        store.add_layer("work")
        return store

    def test_set_then_get(self):
        store = self.make_store()
        store.set_point("work", "0", 5, (10.0, 20.0))
        assert store.layer("work").get("0", 5) == (10.0, 20.0)

    def test_last_write_wins(self):
        store = self.make_store()
        store.set_point("work", "0", 5, (10.0, 20.0))
        store.set_point("work", "0", 5, (11.0, 21.0))
        assert store.layer("work").get("0", 5) == (11.0, 21.0)

    def test_remove_absent_is_noop(self):
        store = self.make_store()
        store.set_point("work", "0", 5, (10.0, 20.0))
        rev = store.revisions["work"]
        store.remove_point("work", "1", 5)
        assert store.layer("work").get("0", 5) == (10.0, 20.0)
        assert store.revisions["work"] == rev

    def test_unknown_layer_and_label(self):
        store = self.make_store()
        with pytest.raises(NotFoundError):
            store.set_point("nope", "0", 1, (1.0, 1.0))
        with pytest.raises(NotFoundError):
            store.set_point("work", "9", 1, (1.0, 1.0))
        with pytest.raises(NotFoundError):
            store.set_point("work", "0", 100, (1.0, 1.0))

    def test_out_of_bounds_point(self):
        store = self.make_store()
        with pytest.raises(ValidationError):
            store.set_point("work", "0", 1, (64.0, 1.0))
        with pytest.raises(ValidationError):
            store.set_point("work", "0", 1, (1.0, -0.5))

    def test_revision_bumps_on_mutation(self):
        store = self.make_store()
        r1 = store.set_point("work", "0", 1, (1.0, 1.0))
        r2 = store.set_point("work", "0", 2, (1.0, 1.0))
        assert r2 == r1 + 1

    def test_undo_restores_previous_point(self):
        store = self.make_store()
        store.set_point("work", "0", 5, (10.0, 20.0))
        store.set_point("work", "0", 5, (12.0, 22.0))
        assert store.undo()
        assert store.layer("work").get("0", 5) == (10.0, 20.0)
        assert store.undo()
        assert store.layer("work").get("0", 5) is None

    def test_undo_depth_bounded(self):
        store = self.make_store()
        for i in range(150):
            store.set_point("work", "0", i % 100, (float(i % 60), 1.0))
        n = 0
        while store.undo():
            n += 1
        assert n == 100

    def test_selection_rules(self):
        store = self.make_store()
        store.add_layer("other")
        store.select_layers(primary="work", overlay="other")
        with pytest.raises(ValidationError):
            store.select_layers(primary="other")
        with pytest.raises(NotFoundError):
            store.select_layers(primary="ghost")


class TestTrim:
    def test_definition(self):
        layer = layer_with({"A": {1: (1, 1), 2: (2, 2), 3: (3, 3)}, "B": {1: (1, 1), 3: (3, 3)}})
        removed = trim(layer, {"A", "B"})
        assert removed == [2]
        assert sorted(layer.labels["A"]) == [1, 3]
        assert sorted(layer.labels["B"]) == [1, 3]

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            layer = random_layer(rng)
            trim(layer, {"0", "1"})
            snapshot = {lb: dict(pts) for lb, pts in layer.labels.items()}
            assert trim(layer, {"0", "1"}) == []
            assert {lb: dict(pts) for lb, pts in layer.labels.items()} == snapshot

    def test_complete_layer_unchanged(self):
        layer = layer_with({"A": {1: (1, 1)}, "B": {1: (2, 2)}})
        assert trim(layer, {"A", "B"}) == []
        assert layer.labels["A"] == {1: (1.0, 1.0)}

    def test_empty_expected_label_removes_all(self):
        layer = layer_with({"A": {1: (1, 1), 2: (2, 2), 3: (3, 3)}, "B": {1: (1, 1), 3: (3, 3)}})
        removed = trim(layer, {"A", "B", "C"})
        assert removed == [1, 2, 3]
        assert all(not pts for pts in layer.labels.values())

    def test_expected_must_be_nonempty(self):
        with pytest.raises(ContractError):
            trim(AnnotationLayer("x"), set())


class TestCopyRange:
    def test_copy_empty_range(self):
        src = layer_with({"A": {5: (1, 1)}})
        dst = AnnotationLayer("dst")
        assert copy_range(src, dst, None, 10, 20) == 0
        assert dst.labels.get("A", {}) == {}

    def test_copy_then_compare(self):
        src = layer_with({"A": {5: (1, 1), 15: (2, 2)}, "B": {15: (3, 3)}})
        dst = AnnotationLayer("dst")
        copy_range(src, dst, None, 0, 20)
        assert dst.labels == src.labels

    def test_overwrites_collisions(self):
        src = layer_with({"A": {5: (1.0, 1.0)}})
        dst = layer_with({"A": {5: (9.0, 9.0), 6: (6.0, 6.0)}}, name="dst")
        copy_range(src, dst, "A", 0, 20)
        assert dst.get("A", 5) == (1.0, 1.0)
        assert dst.get("A", 6) == (6.0, 6.0)


class TestGuess:
    def test_annotated_target_returned_directly(self, static_seq):
        layer = layer_with({"0": {3: (22.0, 30.0)}})
        got = guess(static_seq, layer, "0", 3)
        assert got.ok and got.p == (22.0, 30.0)

    def test_static_sequence_returns_nearest_point(self, static_seq):
        layer = layer_with({"0": {2: (25.0, 25.0)}})
        got = guess(static_seq, layer, "0", 7)
        assert got.ok
        assert got.p == (25.0, 25.0)

    def test_tie_breaks_to_earlier_frame(self, static_seq):
        layer = layer_with({"0": {2: (20.0, 20.0), 6: (40.0, 40.0)}})
        got = guess(static_seq, layer, "0", 4)
        assert got.p == (20.0, 20.0)

    def test_translating_guess_tracks_motion(self, translating):
        seq, truth = translating
        layer = layer_with({"0": {5: truth.get("0", 5)}})
        got = guess(seq, layer, "0", 10)
        tx, ty = truth.get("0", 10)
        assert got.ok
        assert np.hypot(got.p[0] - tx, got.p[1] - ty) < 0.5

    def test_empty_label_rejected(self, static_seq):
        with pytest.raises(ContractError):
            guess(static_seq, AnnotationLayer("x"), "0", 3)

    def test_guess_never_mutates(self, static_seq):
        layer = layer_with({"0": {2: (25.0, 25.0)}})
        before = {lb: dict(p) for lb, p in layer.labels.items()}
        guess(static_seq, layer, "0", 8)
        assert {lb: dict(p) for lb, p in layer.labels.items()} == before


class TestInterpolateGaps:
    def test_static_pair_fills_with_constant(self, static_seq):
        layer = layer_with({"0": {0: (30.0, 30.0), 9: (30.0, 30.0)}})
        written = interpolate_gaps(static_seq, layer, "0", 0, 9)
        assert written == 8
        for t in range(1, 9):
            assert layer.get("0", t) == (30.0, 30.0)

    def test_thirty_frame_gap_yields_28_interior_estimates(self):
        from ustrack import Calibration, Frame, FrameSequence, SynthSpec, make_speckle

        px = make_speckle(SynthSpec(width=48, height=48, seed=30)).pixels
        seq = FrameSequence([Frame(i, px) for i in range(30)], Calibration())
        layer = layer_with({"0": {0: (24.0, 24.0), 29: (24.0, 24.0)}})
        written = interpolate_gaps(seq, layer, "0", 0, 29)
        assert written == 28
        assert all(layer.get("0", t) == (24.0, 24.0) for t in range(30))

    def test_adjacent_pair_writes_nothing(self, static_seq):
        layer = layer_with({"0": {4: (30.0, 30.0), 5: (31.0, 30.0)}})
        assert interpolate_gaps(static_seq, layer, "0", 0, 9) == 0

    def test_translating_interior_on_true_line(self, translating):
        seq, truth = translating
        layer = layer_with({"0": {0: truth.get("0", 0), 29: truth.get("0", 29)}})
        interpolate_gaps(seq, layer, "0", 0, 29)
        for t in range(1, 29):
            tx, ty = truth.get("0", t)
            x, y = layer.get("0", t)
            assert np.hypot(x - tx, y - ty) < 0.3

    def test_endpoints_never_change(self, static_seq):
        layer = layer_with({"0": {0: (30.0, 30.0), 9: (35.0, 35.0)}})
        interpolate_gaps(static_seq, layer, "0", 0, 9)
        assert layer.get("0", 0) == (30.0, 30.0)
        assert layer.get("0", 9) == (35.0, 35.0)

    def test_requires_two_annotations(self, static_seq):
        layer = layer_with({"0": {4: (30.0, 30.0)}})
        with pytest.raises(ContractError):
            interpolate_gaps(static_seq, layer, "0", 0, 9)

    def test_all_labels_mode(self, static_seq):
        layer = layer_with({
            "0": {0: (30.0, 30.0), 5: (30.0, 30.0)},
            "1": {2: (40.0, 40.0), 8: (40.0, 40.0)},
            "2": {3: (11.0, 11.0)},  # too sparse, silently skipped in all-mode
        })
        written = interpolate_gaps(static_seq, layer, None, 0, 9)
        assert written == 4 + 5
        assert layer.get("2", 4) is None


class TestPersistence:
    def test_round_trip_random_layers(self, tmp_path):
        rng = np.random.default_rng(1)
        for i in range(20):
            layer = random_layer(rng, name=f"layer{i}")
            path = tmp_path / f"l{i}.annot.json"
            save_layer(layer, path)
            assert load_layer(path) == layer

    def test_double_save_byte_identical(self, tmp_path):
        layer = random_layer(np.random.default_rng(2))
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_layer(layer, p1)
        save_layer(layer, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_frame_keys_sorted_numerically(self, tmp_path):
        layer = layer_with({"0": {f: (1.0, 2.0) for f in (2, 10, 1)}})
        path = tmp_path / "l.json"
        save_layer(layer, path)
        text = path.read_text()
        assert text.index('"1"') < text.index('"2"') < text.index('"10"')

    def test_schema_version_checked(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema": "ustrack-layer/99", "layer": "x", "labels": {}}')
        with pytest.raises(SchemaVersionError):
            load_layer(path)

    def test_malformed_json_reports_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema": ')
        with pytest.raises(ParseError, match="line"):
            load_layer(path)

    def test_out_of_bounds_point_rejected_with_names(self, tmp_path):
        path = tmp_path / "oob.json"
        path.write_text('{"schema": "ustrack-layer/1", "layer": "x", '
                        '"labels": {"3": {"7": [99.0, 1.0]}}}')
        with pytest.raises(ValidationError, match="label '3' frame 7"):
            load_layer(path, width=64, height=64)
        assert load_layer(path).get("3", 7) == (99.0, 1.0)

    def test_frame_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "oob.json"
        path.write_text('{"schema": "ustrack-layer/1", "layer": "x", '
                        '"labels": {"0": {"70": [1.0, 1.0]}}}')
        with pytest.raises(ValidationError, match="frame 70"):
            load_layer(path, n_frames=50)


class TestCsvInterchange:
    def test_round_trip(self, tmp_path):
        layer = layer_with({"0": {0: (1.5, 2.5), 3: (4.0, 5.0)}, "1": {0: (7.0, 8.0)}})
        path = tmp_path / "k.csv"
        export_csv(layer, path)
        back = import_csv(path)
        assert back == layer

    def test_header_rows(self, tmp_path):
        layer = layer_with({"0": {0: (1.0, 2.0)}}, name="scored")
        path = tmp_path / "k.csv"
        export_csv(layer, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "scorer,scored,scored"
        assert lines[1] == "bodyparts,0,0"
        assert lines[2] == "coords,x,y"
        assert lines[3] == "0,1.0,2.0"

    def test_import_with_likelihood_column(self, tmp_path):
        path = tmp_path / "dlc.csv"
        path.write_text(
            "scorer,net,net,net,net,net,net\n"
            "bodyparts,0,0,0,1,1,1\n"
            "coords,x,y,likelihood,x,y,likelihood\n"
            "0,1.0,2.0,0.99,3.0,4.0,0.5\n"
            "2,5.0,6.0,0.98,,,\n"
        )
        layer = import_csv(path)
        assert layer.name == "net"
        assert layer.get("0", 0) == (1.0, 2.0)
        assert layer.get("1", 0) == (3.0, 4.0)
        assert layer.get("0", 2) == (5.0, 6.0)
        assert layer.get("1", 2) is None

    def test_import_rejects_half_points(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "scorer,net,net\nbodyparts,0,0\ncoords,x,y\n0,1.0,\n"
        )
        with pytest.raises(ParseError, match="only one of x/y"):
            import_csv(path)

    def test_import_rejects_missing_headers(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\nc,d\n")
        with pytest.raises(ParseError):
            import_csv(path)
