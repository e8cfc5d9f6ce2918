"""Geometric measurements from tracked points.

Distances, normalized deformation, enclosed area, and fascicle length /
pennation angle from two aponeurosis lines. All physical quantities are
computed in millimeter space: points are scaled per axis by the calibration
before any distance or angle, so anisotropic pixels cannot distort results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .annotstore import AnnotationLayer
from .errors import ContractError, GeometryError, ValidationError
from .fileio import atomic_write_text
from .media import Calibration

_PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class MetricSeries:
    """Per-frame scalar values with a unit tag; absent frames stay absent."""

    name: str
    unit: str
    values: dict[int, float] = field(default_factory=dict)

    def frames(self) -> list[int]:
        return sorted(self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FascicleModel:
    """Labels defining the two aponeurosis lines and the fascicle direction.

    lower_line[0] doubles as the fascicle's lower intersection point; the
    fascicle runs from there through the fascicle_dir label.
    """

    upper_line: tuple[str, str]
    lower_line: tuple[str, str]
    fascicle_dir: str

    def __post_init__(self):
        labels = (*self.upper_line, *self.lower_line, self.fascicle_dir)
        if len(set(labels)) != 5:
            raise ValidationError(f"fascicle model needs 5 distinct labels, got {labels}")

    @property
    def labels(self) -> tuple[str, ...]:
        return (*self.upper_line, *self.lower_line, self.fascicle_dir)


def _mm(p, cal: Calibration) -> tuple[float, float]:
    return float(p[0]) * cal.mm_per_px_x, float(p[1]) * cal.mm_per_px_y


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance_series(layer: AnnotationLayer, label_a: str, label_b: str,
                    cal: Calibration) -> MetricSeries:
    """Euclidean mm distance per frame where both labels carry a point."""
    pa = layer.labels.get(label_a, {})
    pb = layer.labels.get(label_b, {})
    values = {}
    for frame in sorted(pa.keys() & pb.keys()):
        values[frame] = _dist(_mm(pa[frame], cal), _mm(pb[frame], cal))
    return MetricSeries(f"dist_{label_a}_{label_b}", "mm", values)


def deformation_series(distance: MetricSeries, t0: int) -> MetricSeries:
    """Normalized length change (L - L0) / L0 against the value at frame t0."""
    l0 = distance.values.get(t0)
    if l0 is None:
        raise ContractError(f"reference frame {t0} has no value in series {distance.name!r}")
    if l0 <= 0:
        raise ContractError(f"reference length at frame {t0} must be > 0, got {l0}")
    values = {f: (v - l0) / l0 for f, v in distance.values.items()}
    return MetricSeries(f"deform_{distance.name}", "1", values)


def area_series(layer: AnnotationLayer, labels, cal: Calibration) -> MetricSeries:
    """Shoelace area (mm^2) of the polygon through the labels, in given order."""
    labels = list(labels)
    if len(labels) < 3:
        raise ContractError(f"area needs >= 3 labels, got {len(labels)}")
    frame_sets = [set(layer.labels.get(lb, {})) for lb in labels]
    values = {}
    for frame in sorted(set.intersection(*frame_sets)):
        pts = [_mm(layer.labels[lb][frame], cal) for lb in labels]
        s = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
            s += x0 * y1 - x1 * y0
        values[frame] = abs(s) / 2.0
    return MetricSeries("area_" + "_".join(labels), "mm^2", values)


def line_intersection(p1, p2, q1, q2) -> tuple[float, float]:
    """Intersection of the infinite lines through (p1, p2) and (q1, q2)."""
    dpx, dpy = p2[0] - p1[0], p2[1] - p1[1]
    dqx, dqy = q2[0] - q1[0], q2[1] - q1[1]
    np_ = math.hypot(dpx, dpy)
    nq = math.hypot(dqx, dqy)
    if np_ == 0.0 or nq == 0.0:
        raise GeometryError("degenerate line: coincident defining points")
    cross = (dpx * dqy - dpy * dqx) / (np_ * nq)
    if abs(cross) <= _PARALLEL_TOL:
        raise GeometryError("lines are parallel within tolerance")
    # p1 + s*dp = q1 + u*dq; solve for s
    s = ((q1[0] - p1[0]) * dqy - (q1[1] - p1[1]) * dqx) / (dpx * dqy - dpy * dqx)
    return p1[0] + s * dpx, p1[1] + s * dpy


def _angle_deg(u, v) -> float:
    """Unsigned acute angle between directions u and v, in degrees."""
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu == 0.0 or nv == 0.0:
        raise GeometryError("zero-length direction")
    c = abs(u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(min(1.0, c)))


def fascicle_metrics(layer: AnnotationLayer, model: FascicleModel, frame: int,
                     cal: Calibration) -> tuple[float, float]:
    """Fascicle length (mm) and pennation angle (degrees) at one frame.

    Length is measured between the fascicle line's intersections with the
    upper and lower aponeurosis lines; pennation is the acute angle between
    the fascicle and the lower aponeurosis.
    """
    pts = {}
    for lb in model.labels:
        p = layer.get(lb, frame)
        if p is None:
            raise ContractError(f"label {lb!r} missing at frame {frame}")
        pts[lb] = _mm(p, cal)
    u1, u2 = pts[model.upper_line[0]], pts[model.upper_line[1]]
    l1, l2 = pts[model.lower_line[0]], pts[model.lower_line[1]]
    fd = pts[model.fascicle_dir]
    if u1 == u2 or l1 == l2:
        raise GeometryError(f"degenerate aponeurosis line at frame {frame}")
    if l1 == fd:
        raise GeometryError(f"degenerate fascicle direction at frame {frame}")
    hit_upper = line_intersection(l1, fd, u1, u2)
    hit_lower = line_intersection(l1, fd, l1, l2)
    length = _dist(hit_upper, hit_lower)
    pennation = _angle_deg((fd[0] - l1[0], fd[1] - l1[1]), (l2[0] - l1[0], l2[1] - l1[1]))
    if pennation == 0.0:
        raise GeometryError(f"fascicle parallel to lower aponeurosis at frame {frame}")
    return length, pennation


def fascicle_series(layer: AnnotationLayer, model: FascicleModel,
                    cal: Calibration) -> tuple[MetricSeries, MetricSeries]:
    """Length and pennation over every frame where the full model is present."""
    frame_sets = [set(layer.labels.get(lb, {})) for lb in model.labels]
    lengths = {}
    angles = {}
    for frame in sorted(set.intersection(*frame_sets)):
        length, angle = fascicle_metrics(layer, model, frame, cal)
        lengths[frame] = length
        angles[frame] = angle
    return (MetricSeries("fascicle_length", "mm", lengths),
            MetricSeries("pennation_angle", "deg", angles))


def write_series_csv(series: MetricSeries, path, fps: float) -> None:
    """CSV with header frame,time_s,<metric>; one row per present frame."""
    lines = [f"frame,time_s,{series.name}"]
    for frame in series.frames():
        lines.append(f"{frame},{frame / fps!r},{series.values[frame]!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_series_json(series: MetricSeries, path, fps: float) -> None:
    doc = {
        "metric": series.name,
        "unit": series.unit,
        "frames": series.frames(),
        "time_s": [f / fps for f in series.frames()],
        "values": [series.values[f] for f in series.frames()],
    }
    atomic_write_text(path, json.dumps(doc, ensure_ascii=False, indent=1) + "\n")
