"""Command-line front end: generate, evaluate, inspect, export-mesh."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .boxmodel import BoxParams, InvalidParamsError, build_box
from .bevel import BevelError
from .datasetio import (
    FormatError,
    generate_dataset,
    json_dumps,
    read_sample,
)
from .mesh import save_obj
from .metrics import EvaluationError, evaluate, load_predictions
from .sampling import ConfigError, load_config
from .solidify import SolidifyError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxscan",
        description="Synthetic cardboard-box scan datasets with 6D ground truth.",
    )
    parser.add_argument("--version", action="version", version=f"boxscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a dataset of simulated scans")
    gen.add_argument("--config", required=True, help="generation config JSON")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--count", required=True, type=int, help="number of samples")
    gen.add_argument("--seed", type=int, default=None, help="override the config master seed")
    gen.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    gen.add_argument("--resume", action="store_true", help="skip samples that already exist")

    ev = sub.add_parser("evaluate", help="score pose predictions against ground truth")
    ev.add_argument("--gt", required=True, help="dataset directory with ground truth")
    ev.add_argument("--pred", required=True, help="predictions JSON file")
    ev.add_argument("--json", action="store_true", help="emit the summary as JSON")

    ins = sub.add_parser("inspect", help="summarize one sample directory")
    ins.add_argument("--sample", required=True, help="sample directory")

    ex = sub.add_parser("export-mesh", help="build a box mesh and write it as OBJ")
    ex.add_argument("--params", required=True, help="box parameters JSON file")
    ex.add_argument("--out", required=True, help="output .obj path")
    return parser


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _cmd_generate(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        return _fail(f"config not found: {config_path}")
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        return _fail(f"config invalid: {exc}")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            return _fail(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
        cfg = cfg.with_seed(args.seed)

    def progress(done: int, total: int) -> None:
        print(f"\r{done}/{total} samples", end="", file=sys.stderr, flush=True)

    try:
        generate_dataset(
            cfg, args.out, args.count, threads=args.threads, resume=args.resume, progress=progress
        )
    except (ConfigError, ValueError, OSError) as exc:
        print(file=sys.stderr)
        return _fail(str(exc))
    print(file=sys.stderr)
    print(f"wrote {args.count} samples to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    try:
        preds = load_predictions(args.pred)
        summary = evaluate(preds, args.gt)
    except (EvaluationError, ValueError, OSError) as exc:
        return _fail(str(exc))
    if args.json:
        print(json_dumps(summary.to_dict()))
    else:
        print(summary.format_table())
        print(f"mean translation error: {summary.mean_te_mm:.3f} mm")
        print(f"mean rotation error:    {summary.mean_re_rad:.3f} rad")
    return 0


def _cmd_inspect(args) -> int:
    try:
        rec = read_sample(args.sample)
    except (FormatError, OSError) as exc:
        return _fail(str(exc))
    cloud = rec.cloud
    valid = cloud.validity
    frac = float(valid.mean())
    print(f"sample index : {rec.sample_index}")
    print(f"master seed  : {rec.master_seed}")
    print(f"cloud        : {cloud.width} x {cloud.height} px, valid fraction {frac:.4f}")
    if valid.any():
        pts = cloud.points[valid]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        print(f"camera-space AABB min: [{lo[0]:.6f} {lo[1]:.6f} {lo[2]:.6f}] m")
        print(f"camera-space AABB max: [{hi[0]:.6f} {hi[1]:.6f} {hi[2]:.6f}] m")
    else:
        print("camera-space AABB    : (no valid points)")
    p = rec.box_params
    print(
        "box params   : size=({:.4f}, {:.4f}, {:.4f}) flap_length={:.4f} flap_taper={:.4f}".format(
            *p.size, p.flap_length, p.flap_taper
        )
    )
    print(
        "               open=({:.4f}, {:.4f}, {:.4f}, {:.4f}) thickness={:.4f} bevel={:.4f}/{}".format(
            *p.open, p.thickness, p.bevel_radius, p.bevel_segments
        )
    )
    vb = rec.volume_box
    print(f"volume box   : center=[{vb.center[0]:.6f} {vb.center[1]:.6f} {vb.center[2]:.6f}] m")
    print(
        f"               half_extents=[{vb.half_extents[0]:.6f} {vb.half_extents[1]:.6f} "
        f"{vb.half_extents[2]:.6f}] m"
    )
    q = vb.rotation_wxyz
    print(f"               rotation_wxyz=[{q[0]:.6f} {q[1]:.6f} {q[2]:.6f} {q[3]:.6f}]")
    return 0


def _cmd_export_mesh(args) -> int:
    params_path = Path(args.params)
    if not params_path.is_file():
        return _fail(f"params file not found: {params_path}")
    try:
        with open(params_path, "r", encoding="utf-8") as fh:
            params = BoxParams.from_dict(json.load(fh))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        return _fail(f"params invalid: {exc}")
    try:
        mesh = build_box(params)
    except (InvalidParamsError, BevelError, SolidifyError) as exc:
        return _fail(f"params rejected: {exc}")
    try:
        save_obj(mesh, args.out)
    except OSError as exc:
        return _fail(str(exc))
    print(f"wrote {mesh.n_vertices} vertices / {mesh.n_triangles} triangles to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "generate":
        return _cmd_generate(args)
    if args.command == "evaluate":
        return _cmd_evaluate(args)
    if args.command == "inspect":
        return _cmd_inspect(args)
    if args.command == "export-mesh":
        return _cmd_export_mesh(args)
    return _fail(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
