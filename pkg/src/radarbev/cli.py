"""Command-line front end: ``radarbev {fuse,simulate,eval,render,sweep}``.

Exit codes: 0 success, 1 input/parse/validation failure, 2 grid or
configuration inconsistency. No output file is written on failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, GridMismatch, RadarBevError
from .ingest import serialize_poses, serialize_sweep
from .pipeline import FrameInputs, atomic_write, fuse_frame, load_frame, write_outputs
from .priors import serialize_priors
from .render import render_svg
from .synth import (
    SceneSpec,
    compute_metrics,
    ego_poses,
    generate_scene,
    metrics_csv,
    split_sweeps,
    sweep_hyperparams,
    SweepRow,
)


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _common(p):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--alpha", type=float, help="radar box scale factor")
    p.add_argument("--beta", type=float, help="IOU acceptance threshold")
    p.add_argument("--grid-cells", type=int, metavar="N", help="BEV cells per side")
    p.add_argument("--half-range", type=float, metavar="F", help="effective depth cutoff in metres")
    p.add_argument("--sweeps", type=int, metavar="N", help="number of sweeps to accumulate (1-3)")


def _frame_args(p):
    p.add_argument("--radar", nargs="+", metavar="PATH", help="radar sweep JSONL files, current first")
    p.add_argument("--priors", metavar="PATH", help="priors JSONL")
    p.add_argument("--poses", metavar="PATH", help="pose JSONL, one record per radar file")


def build_parser():
    parser = argparse.ArgumentParser(prog="radarbev", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="associate radar to priors and write the radar feature map")
    _common(p)
    _frame_args(p)
    p.add_argument("--out", metavar="PATH", help="feature-map output (report goes next to it)")

    p = sub.add_parser("simulate", help="write a synthetic scene as fuse/eval inputs")
    p.add_argument("spec", nargs="?", help="scene spec JSON (defaults when omitted)")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--out", metavar="DIR", default=".")

    p = sub.add_parser("eval", help="score an association report against scene truth")
    p.add_argument("--report", required=True, metavar="PATH")
    p.add_argument("--truth", required=True, metavar="PATH")

    p = sub.add_parser("render", help="render a frame and its association as SVG")
    _common(p)
    _frame_args(p)
    p.add_argument("--report", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH", default="frame.svg")

    p = sub.add_parser("sweep", help="metrics over a grid of alpha/beta values")
    _common(p)
    p.add_argument("spec", nargs="?", help="scene spec JSON (defaults when omitted)")
    p.add_argument("--alphas", default="0.5,1,2", metavar="LIST")
    p.add_argument("--betas", default="0.05,0.1,0.2", metavar="LIST")
    p.add_argument("--seeds", metavar="LIST", help="comma-separated seeds (default: spec seed)")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--out", metavar="PATH", help="CSV output (stdout when omitted)")
    return parser


def _run_config(args):
    overrides = {
        "match.alpha": args.alpha,
        "match.beta": args.beta,
        "grid.cells_per_side": args.grid_cells,
        "grid.half_range": args.half_range,
        "sweeps": args.sweeps,
        "input.radar": getattr(args, "radar", None),
        "input.priors": getattr(args, "priors", None),
        "input.poses": getattr(args, "poses", None),
    }
    if args.command == "fuse":
        overrides["output.path"] = args.out
    try:
        return load_config(args.config, overrides)
    except ConfigError as exc:
        raise CliError(str(exc), 2) from None


def _frame_inputs(cfg):
    return FrameInputs(cfg.radar, cfg.priors, cfg.poses)


def cmd_fuse(args):
    cfg = _run_config(args)
    result = fuse_frame(_frame_inputs(cfg), cfg)
    out = cfg.out or "radar_feature.bevr"
    fmap_path, report_path = write_outputs(result, out)
    c = result.report["counts"]
    print(f"{fmap_path}: {c['matched']} matched / {c['points']} points; report {report_path}",
          file=sys.stderr)
    return 0


def _load_spec(path, seed):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CliError(f"scene spec {path} does not exist") from None
        except ValueError as exc:
            raise CliError(f"scene spec {path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise CliError(f"scene spec {path}: expected a JSON object")
    if seed is not None:
        data["rng_seed"] = seed
    try:
        return SceneSpec.from_dict(data)
    except ConfigError as exc:
        raise CliError(str(exc)) from None


def sweep_frame_id(scene_id, offset):
    return scene_id if offset == 0 else f"{scene_id}-prev{offset}"


def cmd_simulate(args):
    spec = _load_spec(args.spec, args.seed)
    scene = generate_scene(spec)
    poses = ego_poses(spec)
    sweeps = split_sweeps(scene.bundle, poses)
    out = Path(args.out)
    frame_ids = [sweep_frame_id(scene.truth.scene_id, k) for k in range(len(poses))]
    files = {}
    for fid, pts in zip(frame_ids, sweeps):
        files[f"{fid}.jsonl"] = serialize_sweep(pts)
    files["poses.jsonl"] = serialize_poses(zip(frame_ids, poses))
    files["priors.jsonl"] = serialize_priors(scene.priors)
    per_sweep = [[] for _ in poses]
    for p, label in zip(scene.bundle.points, scene.truth.point_labels):
        per_sweep[p.sweep_offset].append(label)
    truth = {
        "scene_id": scene.truth.scene_id,
        "seed": spec.rng_seed,
        "sweeps": per_sweep,
        "object_velocities": [list(v) for v in scene.truth.object_velocities],
        "prior_velocities": [list(v) for v in scene.truth.prior_velocities],
        "spec": spec.to_dict(),
    }
    files["truth.json"] = json.dumps(truth, indent=1) + "\n"
    for name, text in files.items():
        atomic_write(out / name, text)
    print(f"wrote {len(files)} files for {scene.truth.scene_id} to {out}", file=sys.stderr)
    return 0


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"{what} file {path} does not exist") from None
    except ValueError as exc:
        raise CliError(f"{what} file {path}: invalid JSON ({exc})") from None


def eval_metrics(report: dict, truth: dict):
    if report.get("frame_id") != truth.get("scene_id"):
        raise CliError(
            f"report frame {report.get('frame_id')!r} does not match truth scene {truth.get('scene_id')!r}"
        )
    used = int(report.get("sweeps", len(truth["sweeps"])))
    index = {}
    labels = []
    for off, sweep in enumerate(truth["sweeps"][:used]):
        for line, label in enumerate(sweep):
            index[(off, line)] = len(labels)
            labels.append(label)
    velocities = np.zeros((len(labels), 2))
    matches = {}
    for pair in report["pairs"]:
        key = (pair["sweep_offset"], pair["source_index"])
        if key not in index:
            raise CliError(f"report point {key} has no truth record")
        i = index[key]
        matches[i] = pair["prior"]
        velocities[i] = (pair["vx_comp"], pair["vy_comp"])
    return compute_metrics(matches, labels, velocities,
                           truth["object_velocities"], truth["prior_velocities"])


def cmd_eval(args):
    report = _read_json(args.report, "report")
    truth = _read_json(args.truth, "truth")
    metrics = eval_metrics(report, truth)
    row = SweepRow(int(truth.get("seed", 0)), float(report["match"]["alpha"]),
                   float(report["match"]["beta"]), metrics)
    sys.stdout.write(metrics_csv([row]))
    return 0


def cmd_render(args):
    cfg = _run_config(args)
    bundle, priors = load_frame(_frame_inputs(cfg), cfg)
    report = _read_json(args.report, "report")
    if report.get("frame_id") != bundle.frame_id or report.get("counts", {}).get("points") != len(bundle):
        raise CliError(f"report {args.report} does not describe this frame")
    atomic_write(args.out, render_svg(bundle, priors, report, cfg.grid, cfg.policy))
    return 0


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(args):
    cfg = _run_config(args)
    spec = _load_spec(args.spec, args.seed)
    seeds = None
    if args.seeds:
        seeds = [int(v) for v in _floats(args.seeds, "seeds")]
    alphas, betas = _floats(args.alphas, "alphas"), _floats(args.betas, "betas")
    try:
        rows = sweep_hyperparams(alphas, betas, spec, seeds, cfg.policy, cfg.grid, cfg.match.radar_box_edge)
    except ValueError as exc:
        raise CliError(str(exc), 2) from None
    text = metrics_csv(rows)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "fuse": cmd_fuse,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "render": cmd_render,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"radarbev {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, GridMismatch) as exc:
        print(f"radarbev {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RadarBevError as exc:
        print(f"radarbev {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
