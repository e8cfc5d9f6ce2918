"""Command-line surface: synthesize, track, interpolate, filter, measure, evaluate, serve.

Exit codes: 0 success, 1 processing error (diagnostics on stderr), 2 usage
error. Machine-readable output goes to files only, written atomically.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import annotstore, geometry
from .errors import ContractError, UstrackError, ValidationError
from .evalkit import jitter_metric, psd, rmse
from .fileio import atomic_write_bytes, atomic_write_text
from .flow import TrackConfig, track_range
from .jitterfilter import FilterConfig, filter_layer
from .media import Calibration, FrameSequence, open_sequence
from .rstc import RstcConfig
from .synthgen import Composed, MotionField, Shear, Sinusoid, SynthSpec, Translation, render_sequence


def _track_config(args) -> TrackConfig:
    return TrackConfig(win=args.lk_win, levels=args.lk_levels)


def _rstc_config(args) -> RstcConfig:
    return RstcConfig(alpha=args.alpha, track=_track_config(args))


def _add_lk_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lk-win", type=int, default=21, help="LK window side length (odd px)")
    p.add_argument("--lk-levels", type=int, default=3, help="pyramid levels")
    p.add_argument("--alpha", type=float, default=10.0, help="sigmoid steepness")


def _load_seq(args) -> FrameSequence:
    return open_sequence(args.frames)


def _load_layer_checked(path, seq: FrameSequence) -> annotstore.AnnotationLayer:
    return annotstore.load_layer(path, width=seq.width, height=seq.height, n_frames=len(seq))


def _parse_motion(specs: list[str] | None) -> MotionField:
    if not specs:
        return Translation(0.0, 0.0)
    fields = []
    for text in specs:
        kind, _, rest = text.partition(":")
        params = {}
        if rest:
            for item in rest.split(","):
                key, _, val = item.partition("=")
                if not val:
                    raise ValidationError(f"bad motion parameter {item!r} in {text!r}")
                params[key.strip()] = val.strip()
        try:
            if kind == "translation":
                fields.append(Translation(float(params.pop("vx", 0.0)), float(params.pop("vy", 0.0))))
            elif kind == "sinusoid":
                fields.append(Sinusoid(float(params.pop("amplitude", 5.0)),
                                       float(params.pop("freq", 1.0)),
                                       params.pop("axis", "x")))
            elif kind == "shear":
                fields.append(Shear(float(params.pop("rate", 0.001))))
            elif kind == "none":
                fields.append(Translation(0.0, 0.0))
            else:
                raise ValidationError(f"unknown motion kind {kind!r}")
        except ValueError as exc:
            raise ValidationError(f"bad motion spec {text!r}: {exc}") from exc
        if params:
            raise ValidationError(f"unknown motion parameters {sorted(params)} in {text!r}")
    return fields[0] if len(fields) == 1 else Composed(tuple(fields))


def _parse_points(text: str | None) -> dict[str, tuple[float, float]]:
    if not text:
        return {}
    points = {}
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        label, _, coords = item.partition(":")
        xy = coords.split(",")
        if len(xy) != 2:
            raise ValidationError(f"bad point spec {item!r}, expected label:x,y")
        points[label.strip()] = (float(xy[0]), float(xy[1]))
    return points


def _filter_config(args) -> FilterConfig:
    if args.window_frames is not None:
        return FilterConfig(window_frames=args.window_frames, rstc=_rstc_config(args))
    seconds = args.window_seconds if args.window_seconds is not None else 0.6
    return FilterConfig(window_frames=None, window_seconds=seconds, rstc=_rstc_config(args))


# -- subcommand handlers -----------------------------------------------


def cmd_synth(args) -> int:
    spec = SynthSpec(width=args.width, height=args.height, frames=args.frames_n,
                     fps=args.fps, seed=args.seed, speckle_sigma=args.speckle_sigma,
                     sensor_sigma=args.sensor_sigma, motion=_parse_motion(args.motion))
    seq, truth = render_sequence(spec, _parse_points(args.points))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from PIL import Image

    for frame in seq.frames:
        img = Image.fromarray(np.round(frame.pixels * 255.0).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        atomic_write_bytes(out / f"frame_{frame.index:06d}.png", buf.getvalue())
    manifest = {"fps": spec.fps, "mm_per_px": list(spec.mm_per_px),
                "width": spec.width, "height": spec.height, "count": spec.frames}
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    annotstore.save_layer(truth, out / "truth.annot.json")
    print(f"wrote {spec.frames} frames to {out}", file=sys.stderr)
    return 0


def cmd_track(args) -> int:
    seq = _load_seq(args)
    layer = _load_layer_checked(args.layer, seq)
    pts = layer.labels.get(args.label, {})
    if args.from_frame not in pts:
        raise ContractError(f"label {args.label!r} has no annotation at frame {args.from_frame}")
    seg = track_range(seq, pts[args.from_frame], args.from_frame, args.to_frame, _track_config(args))
    lost = int((~seg.ok).sum())
    for k, frame in enumerate(seg.frames()):
        if seg.ok[k]:
            layer.set(args.label, frame, (seg.points[k, 0], seg.points[k, 1]))
    if lost:
        print(f"warning: {lost} frames lost tracking; not written", file=sys.stderr)
    annotstore.save_layer(layer, args.out)
    return 0


def cmd_interp(args) -> int:
    seq = _load_seq(args)
    layer = _load_layer_checked(args.layer, seq)
    label = None if args.label in (None, "all") else args.label
    lo, hi = (0, len(seq) - 1) if args.range is None else _parse_range(args.range, len(seq))
    written = annotstore.interpolate_gaps(seq, layer, label, lo, hi,
                                          _rstc_config(args), overwrite=args.overwrite)
    annotstore.save_layer(layer, args.out)
    print(f"interpolated {written} points", file=sys.stderr)
    return 0


def _parse_range(text: str, n: int) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        lo_i = int(lo) if lo else 0
        hi_i = int(hi) if hi else n - 1
    except ValueError:
        raise ValidationError(f"bad range {text!r}, expected lo:hi") from None
    if not (0 <= lo_i <= hi_i <= n - 1):
        raise ValidationError(f"range {text!r} outside [0, {n - 1}]")
    return lo_i, hi_i


def cmd_filter(args) -> int:
    seq = _load_seq(args)
    layer = _load_layer_checked(args.layer, seq)
    out_layer = filter_layer(seq, layer, _filter_config(args))
    annotstore.save_layer(out_layer, args.out)
    print(f"wrote layer {out_layer.name!r} to {args.out}", file=sys.stderr)
    return 0


def cmd_metrics(args) -> int:
    seq = _load_seq(args)
    layer = _load_layer_checked(args.layer, seq)
    cal = seq.calibration
    labels = [lb.strip() for lb in args.labels.split(",") if lb.strip()]
    if args.kind == "distance" or args.kind == "deformation":
        if len(labels) != 2:
            raise ValidationError(f"{args.kind} needs exactly 2 labels, got {len(labels)}")
        series = geometry.distance_series(layer, labels[0], labels[1], cal)
        if args.kind == "deformation":
            ref = args.ref_frame if args.ref_frame is not None else min(series.values, default=0)
            series = geometry.deformation_series(series, ref)
    elif args.kind == "area":
        series = geometry.area_series(layer, labels, cal)
    elif args.kind == "fascicle":
        if len(labels) != 5:
            raise ValidationError("fascicle needs 5 labels: upper1,upper2,lower1,lower2,fascicle")
        model = geometry.FascicleModel((labels[0], labels[1]), (labels[2], labels[3]), labels[4])
        lengths, angles = geometry.fascicle_series(layer, model, cal)
        geometry.write_series_csv(lengths, args.out, cal.fps)
        if args.out_angle is None:
            raise ValidationError("fascicle metrics need --out-angle for the pennation series")
        geometry.write_series_csv(angles, args.out_angle, cal.fps)
        if args.json:
            geometry.write_series_json(lengths, args.json, cal.fps)
        if args.json_angle:
            geometry.write_series_json(angles, args.json_angle, cal.fps)
        return 0
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown kind {args.kind!r}")
    geometry.write_series_csv(series, args.out, cal.fps)
    if args.json:
        geometry.write_series_json(series, args.json, cal.fps)
    return 0


def cmd_eval(args) -> int:
    seq = _load_seq(args)
    layer = _load_layer_checked(args.layer, seq)
    cal = seq.calibration
    ref = _load_layer_checked(args.ref, seq) if args.ref else None
    labels = ([lb.strip() for lb in args.labels.split(",") if lb.strip()]
              if args.labels else sorted(layer.labels, key=annotstore._label_key))
    metrics: dict[str, dict] = {}
    for lb in labels:
        pts = layer.labels.get(lb)
        if not pts:
            raise ContractError(f"label {lb!r} has no points in layer {layer.name!r}")
        entry: dict = {"n_frames": len(pts)}
        frames = sorted(pts)
        dense = frames == list(range(frames[0], frames[0] + len(frames)))
        if dense:
            entry["jitter_mm"] = jitter_metric({f: pts[f] for f in frames}, cal.fps, cal,
                                               cutoff=args.highpass)
        if ref is not None and lb in ref.labels:
            entry["rmse_mm"] = rmse(pts, ref.labels[lb], cal)
        metrics[lb] = entry
    atomic_write_text(args.out_metrics, json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    if args.out_psd:
        lb = labels[0]
        pts = layer.labels[lb]
        frames = sorted(pts)
        if frames != list(range(frames[0], frames[0] + len(frames))):
            raise ContractError(f"label {lb!r} is not dense; cannot compute a spectrum")
        axis = 0 if args.coord == "x" else 1
        series = np.array([pts[f][axis] for f in frames], dtype=float)
        sp = psd(series, cal.fps)
        lines = ["freq,power"] + [f"{f!r},{p!r}" for f, p in zip(sp.freqs, sp.power)]
        atomic_write_text(args.out_psd, "\n".join(lines) + "\n")
    return 0


def cmd_trim(args) -> int:
    layer = annotstore.load_layer(args.layer)
    expected = {lb.strip() for lb in args.expected.split(",") if lb.strip()}
    removed = annotstore.trim(layer, expected)
    annotstore.save_layer(layer, args.out)
    print(f"removed {len(removed)} incomplete frames", file=sys.stderr)
    return 0


def cmd_import_csv(args) -> int:
    layer = annotstore.import_csv(args.csv, name=args.name)
    annotstore.save_layer(layer, args.out)
    return 0


def cmd_export_csv(args) -> int:
    layer = annotstore.load_layer(args.layer)
    annotstore.export_csv(layer, args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .apiserver import build_session, create_app

    session = build_session(args.frames, layer_paths=args.layer or None)
    app = create_app(session)
    print(f"serving on http://{args.host}:{args.port}", file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ustrack",
                                     description="point tracking toolkit for ultrasound sequences")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic speckle sequence with ground truth")
    p.add_argument("--out", required=True, help="output frame directory")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--frames", dest="frames_n", type=int, default=100)
    p.add_argument("--fps", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speckle-sigma", type=float, default=1.5)
    p.add_argument("--sensor-sigma", type=float, default=0.0)
    p.add_argument("--motion", action="append",
                   help="motion field, e.g. translation:vx=1 or sinusoid:amplitude=5,freq=1,axis=x; repeat to compose")
    p.add_argument("--points", help="truth points as 'label:x,y;label:x,y'")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="chain LK tracking from an annotated frame")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--from", dest="from_frame", type=int, required=True)
    p.add_argument("--to", dest="to_frame", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_lk_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("interp", help="fill gaps between annotations with fused tracklets")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--label", help="label id, or 'all'")
    p.add_argument("--range", help="frame range lo:hi (inclusive)")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--out", required=True)
    _add_lk_flags(p)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("filter", help="transposed sliding-window jitter filter")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--out", required=True)
    win = p.add_mutually_exclusive_group()
    win.add_argument("--window-frames", type=int)
    win.add_argument("--window-seconds", type=float)
    _add_lk_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("metrics", help="distance / deformation / area / fascicle series")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--kind", choices=("distance", "deformation", "area", "fascicle"), required=True)
    p.add_argument("--labels", required=True, help="comma-separated label ids")
    p.add_argument("--ref-frame", type=int, help="reference frame for deformation")
    p.add_argument("--out", required=True, help="CSV output (fascicle: length series)")
    p.add_argument("--out-angle", help="pennation CSV output (fascicle only)")
    p.add_argument("--json", help="JSON mirror output")
    p.add_argument("--json-angle", help="pennation JSON mirror (fascicle only)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("eval", help="RMSE / jitter metrics and Welch spectra")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--ref", help="reference layer for RMSE")
    p.add_argument("--labels", help="labels to evaluate (default: all)")
    p.add_argument("--coord", choices=("x", "y"), default="x")
    p.add_argument("--highpass", type=float, default=1.5)
    p.add_argument("--out-metrics", required=True, help="metrics JSON path")
    p.add_argument("--out-psd", help="PSD CSV path (first label)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trim", help="drop frames with incomplete annotations")
    p.add_argument("--layer", required=True)
    p.add_argument("--expected", required=True, help="comma-separated label ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("import-csv", help="keypoint CSV -> layer file")
    p.add_argument("--csv", required=True)
    p.add_argument("--name", help="layer name override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import_csv)

    p = sub.add_parser("export-csv", help="layer file -> keypoint CSV")
    p.add_argument("--layer", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_csv)

    p = sub.add_parser("serve", help="run the local annotation HTTP service")
    p.add_argument("--frames", required=True)
    p.add_argument("--layer", action="append", help="layer file(s) to load")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8472)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UstrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
