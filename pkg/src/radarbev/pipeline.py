"""Frame-level glue: load inputs, associate, rasterize, and build the report."""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

from .association import Association, associate
from .config import RunConfig
from .errors import ConfigError, ParseError
from .feature import RadarFeatureMap, feature_map_to_bytes, rasterize
from .ingest import SweepBundle, accumulate_sweeps, parse_poses, parse_sweep
from .priors import load_priors

REPORT_VERSION = 1


class MissingInput(ParseError):
    pass


class FrameInputs(NamedTuple):
    radar: tuple
    priors: str
    poses: Optional[str] = None


class FuseResult(NamedTuple):
    bundle: SweepBundle
    priors: list
    association: Association
    feature_map: RadarFeatureMap
    report: dict


def _read(path, what):
    if path is None:
        raise MissingInput(f"missing input: {what} file not given")
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise MissingInput(f"missing input: {what} file {path} does not exist") from None
    except OSError as exc:
        raise MissingInput(f"cannot read {what} file {path}: {exc.strerror}") from None


def load_bundle(radar_paths: Sequence, poses_path, cfg: RunConfig) -> SweepBundle:
    """Read up to ``cfg.sweeps`` radar files (current first) and accumulate them.

    Pose record ``k`` in the poses file describes radar file ``k``; extra
    trailing records are ignored. A poses file is mandatory whenever more
    than one sweep is configured.
    """
    radar_paths = list(radar_paths)
    if not radar_paths:
        raise MissingInput("missing input: no radar sweep file given")
    if len(radar_paths) > cfg.sweeps:
        raise ConfigError(f"{len(radar_paths)} radar files given but sweeps = {cfg.sweeps}")
    if cfg.sweeps > 1 and poses_path is None:
        raise MissingInput(f"missing input: poses file is required with sweeps = {cfg.sweeps}")
    sweeps = [parse_sweep(_read(p, "radar sweep"), source=str(p)) for p in radar_paths]
    frame_id = Path(radar_paths[0]).stem
    poses = [None] * len(sweeps)
    if poses_path is not None:
        records = parse_poses(_read(poses_path, "poses"), source=str(poses_path))
        if len(records) < len(radar_paths):
            raise ParseError(
                f"{len(records)} pose records for {len(radar_paths)} radar files", source=str(poses_path)
            )
        frame_id = records[0][0]
        poses = [pose for _, pose in records[:len(radar_paths)]]
    args = [(pts, pose) for pts, pose in zip(sweeps, poses)]
    args += [None] * (3 - len(args))
    return accumulate_sweeps(args[0], args[1], args[2], grid=cfg.grid, frame_id=frame_id)


def load_frame(inputs: FrameInputs, cfg: RunConfig):
    bundle = load_bundle(inputs.radar, inputs.poses, cfg)
    priors = load_priors(_read(inputs.priors, "priors"), source=str(inputs.priors))
    return bundle, priors


def build_report(bundle: SweepBundle, priors, assoc: Association, cfg: RunConfig) -> dict:
    excluded = sorted({p.class_id for p in priors if not cfg.policy.enabled(p.class_id)})
    notes = []
    if excluded:
        notes.append(
            f"class policy excluded {assoc.excluded_by_policy} prior(s) of class(es) {', '.join(excluded)}"
        )
    pairs = []
    for pr in assoc.pairs:
        pt = bundle.points[pr.point]
        pairs.append({
            "point": pr.point,
            "prior": pr.prior,
            "iou": pr.iou,
            "box": list(pr.box.as_tuple()),
            "x": pt.x,
            "y": pt.y,
            "vx_comp": pt.vx_comp,
            "vy_comp": pt.vy_comp,
            "sweep_offset": pt.sweep_offset,
            "source_index": pt.source_index,
        })
    return {
        "version": REPORT_VERSION,
        "frame_id": bundle.frame_id,
        "grid": {"half_range": cfg.grid.half_range, "cells_per_side": cfg.grid.cells_per_side},
        "match": {"alpha": cfg.match.alpha, "beta": cfg.match.beta,
                  "radar_box_edge": cfg.match.radar_box_edge},
        "sweeps": cfg.sweeps,
        "policy": dict(cfg.policy.fusion_enabled),
        "excluded_classes": list(cfg.policy.excluded),
        "counts": {
            "points": len(bundle),
            "priors": len(priors),
            "priors_excluded_by_policy": assoc.excluded_by_policy,
            "labels_after_dedup": len(assoc.label_indices),
            "candidates": assoc.n_candidates,
            "matched": len(assoc.pairs),
            "unmatched": len(assoc.unmatched_points),
        },
        "warnings": {"degenerate_clips": assoc.degenerate_clips},
        "notes": notes,
        "points": [[p.sweep_offset, p.source_index] for p in bundle.points],
        "pairs": pairs,
        "unmatched": list(assoc.unmatched_points),
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=1) + "\n"


def fuse(bundle: SweepBundle, priors, cfg: RunConfig = RunConfig()) -> FuseResult:
    assoc = associate(bundle, priors, cfg.policy, cfg.match, cfg.grid)
    fmap = rasterize(assoc, bundle, cfg.grid)
    return FuseResult(bundle, priors, assoc, fmap, build_report(bundle, priors, assoc, cfg))


def fuse_frame(inputs: FrameInputs, cfg: RunConfig = RunConfig()) -> FuseResult:
    bundle, priors = load_frame(inputs, cfg)
    return fuse(bundle, priors, cfg)


def atomic_write(path, data) -> None:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def report_path_for(out_path) -> Path:
    return Path(out_path).with_suffix(".report.json")


def write_outputs(result: FuseResult, out_path) -> tuple:
    blob = feature_map_to_bytes(result.feature_map)
    text = report_to_json(result.report)
    report_path = report_path_for(out_path)
    atomic_write(out_path, blob)
    atomic_write(report_path, text)
    return Path(out_path), report_path


def fuse_batch(frames: Sequence[FrameInputs], cfg: RunConfig, out_paths: Sequence, workers: int = 1):
    """Fuse independent frames, optionally on a thread pool. Outputs are per frame."""
    def run(job):
        inputs, out = job
        return write_outputs(fuse_frame(inputs, cfg), out)

    jobs = list(zip(frames, out_paths))
    if workers <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
