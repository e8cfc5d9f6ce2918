"""Layered point annotations with flow-assisted editing and persistence.

A layer maps label ids to sparse frame -> point maps. The store owns a set
of named layers bound to one sequence's geometry, serializes every mutation,
keeps a bounded undo history, and backs the HTTP API. Layer files use a
canonical JSON form so saving twice yields byte-identical output.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    ContractError,
    NotFoundError,
    ParseError,
    SchemaVersionError,
    ValidationError,
)
from .fileio import atomic_write_text
from .flow import OK, TrackConfig, TrackedPoint, track_range
from .media import FrameSequence
from .rstc import RstcConfig, rstc_tracklet

LAYER_SCHEMA = "ustrack-layer/1"
UNDO_DEPTH = 100

Point = tuple[float, float]


def _label_key(label: str):
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


@dataclass
class AnnotationLayer:
    """Named collection of per-label sparse trajectories."""

    name: str
    labels: dict[str, dict[int, Point]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValidationError("layer name must be non-empty")

    def get(self, label: str, frame: int) -> Point | None:
        return self.labels.get(label, {}).get(frame)

    def set(self, label: str, frame: int, p: Point) -> None:
        self.labels.setdefault(label, {})[frame] = (float(p[0]), float(p[1]))

    def remove(self, label: str, frame: int) -> Point | None:
        return self.labels.get(label, {}).pop(frame, None)

    def annotated_frames(self, label: str | None = None) -> list[int]:
        """Sorted frames carrying a point for `label`, or for any label."""
        if label is not None:
            return sorted(self.labels.get(label, {}))
        frames: set[int] = set()
        for pts in self.labels.values():
            frames.update(pts)
        return sorted(frames)

    def copy(self, name: str | None = None) -> "AnnotationLayer":
        return AnnotationLayer(name or self.name, {lb: dict(pts) for lb, pts in self.labels.items()})


def trim(layer: AnnotationLayer, expected_labels) -> list[int]:
    """Drop every frame where any expected label is missing, from all labels.

    Returns the sorted list of removed frames. Idempotent.
    """
    expected = set(expected_labels)
    if not expected:
        raise ContractError("trim requires a non-empty expected label set")
    removed = []
    for frame in layer.annotated_frames():
        if any(frame not in layer.labels.get(lb, {}) for lb in expected):
            removed.append(frame)
    for frame in removed:
        for pts in layer.labels.values():
            pts.pop(frame, None)
    return removed


def copy_range(src: AnnotationLayer, dst: AnnotationLayer, label: str | None,
               lo: int, hi: int) -> int:
    """Copy points with lo <= frame <= hi into dst, overwriting collisions."""
    if hi < lo:
        raise ContractError(f"empty range [{lo}, {hi}]")
    labels = [label] if label is not None else list(src.labels)
    copied = 0
    for lb in labels:
        for frame, p in src.labels.get(lb, {}).items():
            if lo <= frame <= hi:
                dst.set(lb, frame, p)
                copied += 1
    return copied


def guess(seq: FrameSequence, layer: AnnotationLayer, label: str, frame: int,
          cfg: TrackConfig | None = None) -> TrackedPoint:
    """Propose a point at `frame` by tracking from the nearest labeled frame.

    Ties between equidistant neighbors resolve to the earlier frame. The
    layer is never mutated.
    """
    annotated = layer.annotated_frames(label)
    if not annotated:
        raise ContractError(f"label {label!r} has no annotated frames")
    nearest = min(annotated, key=lambda f: (abs(f - frame), f))
    p = layer.labels[label][nearest]
    if nearest == frame:
        return TrackedPoint(p, OK, 0.0)
    seg = track_range(seq, p, nearest, frame, cfg or TrackConfig())
    x, y = seg.point_at(frame)
    status = OK if bool(seg.ok[-1]) else "lost"
    return TrackedPoint((x, y), status, float(seg.residuals[-1]))


def interpolate_gaps(seq: FrameSequence, layer: AnnotationLayer, label: str | None,
                     lo: int, hi: int, cfg: RstcConfig | None = None,
                     overwrite: bool = False) -> int:
    """Fill gaps between labeled frames with fused tracklet estimates.

    For each consecutive annotated pair (a, b) inside [lo, hi] with
    b - a >= 2, interior frames a+1 .. b-1 receive tracklet estimates.
    Existing interior points are kept unless `overwrite`. Returns the
    number of points written.
    """
    cfg = cfg or RstcConfig()
    if label is not None:
        targets = [label]
    else:
        targets = [lb for lb in layer.labels
                   if len([f for f in layer.labels[lb] if lo <= f <= hi]) >= 2]
        if not targets:
            raise ContractError(f"no label has 2+ annotations in [{lo}, {hi}]")
    written = 0
    for lb in targets:
        frames = [f for f in layer.annotated_frames(lb) if lo <= f <= hi]
        if len(frames) < 2:
            raise ContractError(f"label {lb!r} has {len(frames)} annotations in [{lo}, {hi}], need >= 2")
        for a, b in zip(frames, frames[1:]):
            if b - a < 2:
                continue
            tk = rstc_tracklet(seq, a, b, layer.labels[lb][a], layer.labels[lb][b], cfg)
            for k in range(1, b - a):
                frame = a + k
                if not overwrite and frame in layer.labels[lb]:
                    continue
                layer.set(lb, frame, (tk.estimates[k, 0], tk.estimates[k, 1]))
                written += 1
    return written


def _canonical_payload(layer: AnnotationLayer) -> dict:
    labels = {}
    for lb in sorted(layer.labels, key=_label_key):
        pts = layer.labels[lb]
        labels[lb] = {str(f): [float(pts[f][0]), float(pts[f][1])] for f in sorted(pts)}
    return {"schema": LAYER_SCHEMA, "layer": layer.name, "labels": labels}


def save_layer(layer: AnnotationLayer, path) -> Path:
    """Write the canonical layer file; byte-deterministic for equal layers."""
    text = json.dumps(_canonical_payload(layer), ensure_ascii=False, indent=1) + "\n"
    return atomic_write_text(path, text)


def load_layer(path, *, width: int | None = None, height: int | None = None,
               n_frames: int | None = None) -> AnnotationLayer:
    """Read a layer file, validating geometry against the given bounds."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise ParseError(f"{path}: missing schema field")
    if doc["schema"] != LAYER_SCHEMA:
        raise SchemaVersionError(f"{path}: unsupported schema {doc['schema']!r}, expected {LAYER_SCHEMA!r}")
    name = doc.get("layer")
    if not isinstance(name, str) or not name:
        raise ParseError(f"{path}: layer name missing or empty")
    raw_labels = doc.get("labels")
    if not isinstance(raw_labels, dict):
        raise ParseError(f"{path}: labels must be an object")
    layer = AnnotationLayer(name)
    for lb, pts in raw_labels.items():
        if not isinstance(pts, dict):
            raise ParseError(f"{path}: label {lb!r}: frames must be an object")
        for fkey, xy in pts.items():
            try:
                frame = int(fkey)
            except ValueError:
                raise ParseError(f"{path}: label {lb!r}: bad frame key {fkey!r}") from None
            if not (isinstance(xy, list) and len(xy) == 2):
                raise ParseError(f"{path}: label {lb!r} frame {frame}: point must be [x, y]")
            x, y = float(xy[0]), float(xy[1])
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValidationError(f"{path}: label {lb!r} frame {frame}: non-finite point")
            if frame < 0 or (n_frames is not None and frame >= n_frames):
                raise ValidationError(f"{path}: label {lb!r} frame {frame}: frame index out of range")
            if width is not None and not (0.0 <= x <= width - 1):
                raise ValidationError(f"{path}: label {lb!r} frame {frame}: x={x} outside [0, {width - 1}]")
            if height is not None and not (0.0 <= y <= height - 1):
                raise ValidationError(f"{path}: label {lb!r} frame {frame}: y={y} outside [0, {height - 1}]")
            layer.set(lb, frame, (x, y))
    return layer


def export_csv(layer: AnnotationLayer, path) -> Path:
    """Keypoint CSV with scorer/bodyparts/coords header rows, x,y per label."""
    labels = sorted(layer.labels, key=_label_key)
    frames = layer.annotated_frames()
    rows = [["scorer"] + [layer.name] * (2 * len(labels)),
            ["bodyparts"] + [lb for lb in labels for _ in (0, 1)],
            ["coords"] + ["x", "y"] * len(labels)]
    for frame in frames:
        row = [str(frame)]
        for lb in labels:
            p = layer.labels[lb].get(frame)
            row += ["", ""] if p is None else [repr(p[0]), repr(p[1])]
        rows.append(row)
    text = "\n".join(",".join(r) for r in rows) + "\n"
    return atomic_write_text(path, text)


def import_csv(path, name: str | None = None) -> AnnotationLayer:
    """Read a keypoint CSV (x,y or x,y,likelihood per label) into a layer."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 3:
        raise ParseError(f"{path}: expected scorer/bodyparts/coords header rows")
    scorer_row, parts_row, coords_row = rows[0], rows[1], rows[2]
    if scorer_row[:1] != ["scorer"] or parts_row[:1] != ["bodyparts"] or coords_row[:1] != ["coords"]:
        raise ParseError(f"{path}: header rows must start with scorer/bodyparts/coords")
    if not (len(parts_row) == len(coords_row) == len(scorer_row)):
        raise ParseError(f"{path}: header rows have inconsistent widths")
    columns = []  # (column index, label, coord)
    for ci in range(1, len(coords_row)):
        coord = coords_row[ci].strip()
        if coord not in ("x", "y", "likelihood"):
            raise ParseError(f"{path}: column {ci}: unknown coord {coord!r}")
        columns.append((ci, parts_row[ci].strip(), coord))
    layer = AnnotationLayer(name or (scorer_row[1].strip() if len(scorer_row) > 1 else "imported"))
    for ri, row in enumerate(rows[3:], start=4):
        if not row or not any(cell.strip() for cell in row):
            continue
        try:
            frame = int(row[0])
        except ValueError:
            raise ParseError(f"{path}: line {ri}: bad frame id {row[0]!r}") from None
        xs: dict[str, float] = {}
        ys: dict[str, float] = {}
        for ci, lb, coord in columns:
            cell = row[ci].strip() if ci < len(row) else ""
            if coord == "likelihood" or not cell:
                continue
            try:
                val = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {ri}: bad number {cell!r} for label {lb!r}") from None
            (xs if coord == "x" else ys)[lb] = val
        for lb in xs.keys() | ys.keys():
            if lb not in xs or lb not in ys:
                raise ParseError(f"{path}: line {ri}: label {lb!r} has only one of x/y")
            layer.set(lb, frame, (xs[lb], ys[lb]))
    return layer


DEFAULT_LABELS = tuple(str(i) for i in range(11))


class AnnotationStore:
    """Single-writer collection of layers bound to one sequence's geometry."""

    def __init__(self, n_frames: int, width: int, height: int, labels=DEFAULT_LABELS):
        if n_frames < 1 or width < 2 or height < 2:
            raise ValidationError("store needs n_frames >= 1 and frames of at least 2x2")
        self.n_frames = n_frames
        self.width = width
        self.height = height
        self.labels: tuple[str, ...] = tuple(labels)
        self.layers: dict[str, AnnotationLayer] = {}
        self.revisions: dict[str, int] = {}
        self.primary_layer: str | None = None
        self.overlay_layer: str | None = None
        self.current_label: str | None = self.labels[0] if self.labels else None
        self.current_frame: int = 0
        self._undo: deque = deque(maxlen=UNDO_DEPTH)

    # -- layer registry ------------------------------------------------

    def layer(self, name: str) -> AnnotationLayer:
        try:
            return self.layers[name]
        except KeyError:
            raise NotFoundError(f"unknown layer {name!r}") from None

    def add_layer(self, name: str) -> AnnotationLayer:
        if name in self.layers:
            raise ValidationError(f"layer {name!r} already exists")
        layer = AnnotationLayer(name)
        self.layers[name] = layer
        self.revisions[name] = 0
        if self.primary_layer is None:
            self.primary_layer = name
        self._undo.append(("drop_layer", name))
        return layer

    def adopt_layer(self, layer: AnnotationLayer, replace: bool = False) -> None:
        """Install an externally built layer (load, import, filter output)."""
        if layer.name in self.layers and not replace:
            raise ValidationError(f"layer {layer.name!r} already exists")
        for lb in layer.labels:
            if lb not in self.labels:
                self.labels = self.labels + (lb,)
        self.layers[layer.name] = layer
        self.revisions[layer.name] = self.revisions.get(layer.name, 0) + 1
        if self.primary_layer is None:
            self.primary_layer = layer.name

    def add_label(self, label: str) -> None:
        if not label:
            raise ValidationError("label id must be non-empty")
        if label not in self.labels:
            self.labels = self.labels + (label,)

    def _check_label(self, label: str) -> None:
        if label not in self.labels:
            raise NotFoundError(f"unknown label {label!r}")

    def _check_frame(self, frame: int) -> None:
        if not 0 <= frame < self.n_frames:
            raise NotFoundError(f"frame {frame} outside [0, {self.n_frames - 1}]")

    def _check_point(self, p) -> Point:
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError("point coordinates must be finite")
        if not (0.0 <= x <= self.width - 1 and 0.0 <= y <= self.height - 1):
            raise ValidationError(
                f"point ({x}, {y}) outside frame bounds [0, {self.width - 1}] x [0, {self.height - 1}]"
            )
        return (x, y)

    def _bump(self, name: str) -> int:
        self.revisions[name] = self.revisions.get(name, 0) + 1
        return self.revisions[name]

    def _record(self, name: str, entries: list[tuple[str, int, Point | None]]) -> None:
        if entries:
            self._undo.append(("points", name, entries))

    # -- selections ----------------------------------------------------

    def select_layers(self, primary: str | None = None, overlay: str | None = None) -> None:
        if primary is not None:
            self.layer(primary)
        if overlay is not None:
            self.layer(overlay)
        if primary is not None and overlay is not None and primary == overlay:
            raise ValidationError("primary and overlay layers must differ")
        if primary is not None:
            if overlay is None and primary == self.overlay_layer:
                raise ValidationError("primary and overlay layers must differ")
            self.primary_layer = primary
        if overlay is not None:
            if primary is None and overlay == self.primary_layer:
                raise ValidationError("primary and overlay layers must differ")
            self.overlay_layer = overlay

    # -- mutations -----------------------------------------------------

    def set_point(self, layer_name: str, label: str, frame: int, p) -> int:
        layer = self.layer(layer_name)
        self._check_label(label)
        self._check_frame(frame)
        pt = self._check_point(p)
        old = layer.get(label, frame)
        layer.set(label, frame, pt)
        self._record(layer_name, [(label, frame, old)])
        return self._bump(layer_name)

    def remove_point(self, layer_name: str, label: str, frame: int) -> int:
        layer = self.layer(layer_name)
        self._check_label(label)
        self._check_frame(frame)
        old = layer.remove(label, frame)
        if old is None:
            return self.revisions[layer_name]
        self._record(layer_name, [(label, frame, old)])
        return self._bump(layer_name)

    def trim(self, layer_name: str, expected_labels) -> list[int]:
        layer = self.layer(layer_name)
        before = {lb: dict(pts) for lb, pts in layer.labels.items()}
        removed = trim(layer, expected_labels)
        entries = [(lb, f, before[lb][f]) for lb in before for f in before[lb]
                   if f not in layer.labels.get(lb, {})]
        self._record(layer_name, entries)
        if removed:
            self._bump(layer_name)
        return removed

    def copy_range(self, src_name: str, dst_name: str, label: str | None,
                   lo: int, hi: int) -> int:
        src = self.layer(src_name)
        dst = self.layer(dst_name)
        if label is not None:
            self._check_label(label)
        self._check_frame(lo)
        self._check_frame(hi)
        before = {lb: dict(pts) for lb, pts in dst.labels.items()}
        copied = copy_range(src, dst, label, lo, hi)
        entries = [(lb, f, before.get(lb, {}).get(f))
                   for lb in dst.labels for f in dst.labels[lb]
                   if dst.labels[lb][f] != before.get(lb, {}).get(f)]
        self._record(dst_name, entries)
        if copied:
            self._bump(dst_name)
        return copied

    def guess(self, seq: FrameSequence, layer_name: str, label: str, frame: int,
              cfg: TrackConfig | None = None) -> TrackedPoint:
        layer = self.layer(layer_name)
        self._check_label(label)
        self._check_frame(frame)
        return guess(seq, layer, label, frame, cfg)

    def interpolate_gaps(self, seq: FrameSequence, layer_name: str, label: str | None,
                         lo: int, hi: int, cfg: RstcConfig | None = None,
                         overwrite: bool = False) -> int:
        layer = self.layer(layer_name)
        if label is not None:
            self._check_label(label)
        self._check_frame(lo)
        self._check_frame(hi)
        before = {lb: dict(pts) for lb, pts in layer.labels.items()}
        written = interpolate_gaps(seq, layer, label, lo, hi, cfg, overwrite)
        entries = [(lb, f, before.get(lb, {}).get(f))
                   for lb in layer.labels for f in layer.labels[lb]
                   if f not in before.get(lb, {}) or layer.labels[lb][f] != before[lb][f]]
        self._record(layer_name, entries)
        if written:
            self._bump(layer_name)
        return written

    def undo(self) -> bool:
        """Revert the most recent mutation; returns False when history is empty."""
        if not self._undo:
            return False
        action = self._undo.pop()
        if action[0] == "drop_layer":
            self.layers.pop(action[1], None)
            self.revisions.pop(action[1], None)
            if self.primary_layer == action[1]:
                self.primary_layer = None
            if self.overlay_layer == action[1]:
                self.overlay_layer = None
            return True
        _, name, entries = action
        layer = self.layers.get(name)
        if layer is None:
            return True
        for label, frame, old in entries:
            if old is None:
                layer.remove(label, frame)
            else:
                layer.set(label, frame, old)
        self._bump(name)
        return True
