"""Synthetic BEV scenes with known truth, and filtering-quality metrics.

Scenes are generated directly in the current ego frame. Previous-sweep
points can be re-expressed in their own ego frames with :func:`split_sweeps`
for writing sweep files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .association import Association, MatchConfig, associate
from .errors import ConfigError, GenerationFailure
from .geometry import EgoPose, GridSpec, relative_yaw, rotate_planar, transform_points
from .ingest import RadarPoint, SweepBundle
from .priors import CLASSES, ClassPolicy, PriorBox

CLUTTER = -1
MAX_REJECTIONS = 10_000

# (width range, length range) in metres; every range keeps the footprint at
# or under 20 m^2 so a full 1 m radar box clears IOU 0.05 inside any label
DEFAULT_SIZES = {
    "car": ((1.7, 2.1), (4.0, 4.9)),
    "truck": ((2.2, 2.6), (5.5, 7.5)),
    "bus": ((2.5, 2.6), (7.0, 7.6)),
    "trailer": ((2.3, 2.45), (6.0, 8.0)),
    "construction_vehicle": ((2.4, 2.8), (5.0, 7.0)),
    "pedestrian": ((0.5, 0.8), (0.5, 0.9)),
    "motorcycle": ((0.7, 0.9), (1.9, 2.3)),
    "bicycle": ((0.5, 0.7), (1.6, 1.9)),
    "traffic_cone": ((0.3, 0.5), (0.3, 0.5)),
    "barrier": ((0.4, 0.6), (1.8, 2.6)),
}
DEFAULT_CLASSES = ("car", "truck", "bus", "trailer", "construction_vehicle")


@dataclass(frozen=True)
class SceneSpec:
    rng_seed: int = 0
    n_objects: int = 20
    classes: tuple = DEFAULT_CLASSES
    size_ranges: dict = field(default_factory=lambda: dict(DEFAULT_SIZES))
    points_per_object: int = 3
    clutter_points: int = 100
    position_noise_sigma: float = 0.0
    prior_velocity_noise_sigma: float = 0.5
    radar_velocity_noise_sigma: float = 0.0
    max_object_speed: float = 15.0
    label_margin: float = 1.2
    point_inset: float = 0.5
    min_point_spacing: float = 1.2
    clutter_clearance: float = 0.5
    placement_range: float = 45.0
    yaw_mode: str = "axis"
    structured_clutter: bool = False
    structured_per_object: int = 2
    n_sweeps: int = 1
    ego_speed: float = 10.0
    ego_yaw_rate: float = 0.0
    sweep_interval_us: int = 50_000
    start_time_us: int = 1_000_000_000
    half_range: float = 51.2

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        sizes = {k: (tuple(v[0]), tuple(v[1])) for k, v in dict(self.size_ranges).items()}
        object.__setattr__(self, "size_ranges", sizes)
        self.validate()

    def validate(self):
        def fail(name, why):
            raise ConfigError(f"scene spec field {name!r} {why}")

        for name in ("n_objects", "points_per_object", "clutter_points", "structured_per_object"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                fail(name, "must be a non-negative integer")
        for name in ("position_noise_sigma", "prior_velocity_noise_sigma", "radar_velocity_noise_sigma",
                     "max_object_speed", "point_inset", "min_point_spacing", "clutter_clearance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                fail(name, f"must be a finite value >= 0, got {value!r}")
        if not self.label_margin >= 0.2:
            fail("label_margin", f"must be >= 0.2 m, got {self.label_margin!r}")
        if not 0 < self.placement_range < self.half_range:
            fail("placement_range", "must lie in (0, half_range)")
        if self.n_sweeps not in (1, 2, 3):
            fail("n_sweeps", "must be 1, 2 or 3")
        if self.yaw_mode not in ("axis", "random"):
            fail("yaw_mode", "must be 'axis' or 'random'")
        if self.sweep_interval_us <= 0:
            fail("sweep_interval_us", "must be positive")
        if self.n_objects and not self.classes:
            fail("classes", "must not be empty when n_objects > 0")
        for c in self.classes:
            if c not in CLASSES:
                fail("classes", f"contains unknown class {c!r}")
            if c not in self.size_ranges:
                fail("size_ranges", f"has no entry for class {c!r}")
        for c, ((w0, w1), (l0, l1)) in self.size_ranges.items():
            if not (0 < w0 <= w1 and 0 < l0 <= l1):
                fail("size_ranges", f"entry for {c!r} must be increasing positive ranges")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scene spec fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["size_ranges"] = {k: [list(w), list(l)] for k, (w, l) in self.size_ranges.items()}
        return d


@dataclass(frozen=True)
class SceneTruth:
    scene_id: str
    point_labels: tuple  # prior index per bundle point, CLUTTER for clutter
    object_velocities: tuple
    prior_velocities: tuple


class Scene(NamedTuple):
    bundle: SweepBundle
    priors: list
    truth: SceneTruth


def scene_id(seed: int) -> str:
    return f"scene-{seed:06d}"


def ego_poses(spec: SceneSpec) -> list:
    """Poses of sweep offsets 0..n_sweeps-1 (current first) along a constant-turn path."""
    poses = []
    for k in range(spec.n_sweeps):
        dt = -k * spec.sweep_interval_us * 1e-6
        yaw = spec.ego_yaw_rate * dt
        if spec.ego_yaw_rate == 0.0:
            x, y = spec.ego_speed * dt, 0.0
        else:
            r = spec.ego_speed / spec.ego_yaw_rate
            x, y = r * math.sin(yaw), r * (1.0 - math.cos(yaw))
        poses.append(EgoPose.from_yaw(x, y, yaw, spec.start_time_us - k * spec.sweep_interval_us))
    return poses


def _gap_ok(a, b, margin):
    """True when boxes a and b are separated by at least ``margin`` along some axis."""
    return (
        b[0] - a[2] >= margin or a[0] - b[2] >= margin
        or b[1] - a[3] >= margin or a[1] - b[3] >= margin
    )


def _place_objects(spec, rng):
    objects = []
    rejections = 0
    while len(objects) < spec.n_objects:
        cls = spec.classes[int(rng.integers(len(spec.classes)))]
        (w0, w1), (l0, l1) = spec.size_ranges[cls]
        w, l = rng.uniform(w0, w1), rng.uniform(l0, l1)
        if spec.yaw_mode == "axis":
            yaw = float(rng.integers(4)) * (math.pi / 2) - math.pi / 2
        else:
            yaw = rng.uniform(-math.pi, math.pi)
        cx, cy = rng.uniform(-spec.placement_range, spec.placement_range, size=2)
        prior = PriorBox(cls, float(cx), float(cy), float(w), float(l), float(yaw), 1.0)
        fp = prior.footprint().as_tuple()
        if all(_gap_ok(fp, o[0].footprint().as_tuple(), spec.label_margin) for o in objects):
            objects.append((prior, fp))
            continue
        rejections += 1
        if rejections >= MAX_REJECTIONS:
            raise GenerationFailure(
                f"placed {len(objects)}/{spec.n_objects} objects before {MAX_REJECTIONS} rejections"
            )
    return objects


def _sample_object_points(fp, spec, rng):
    ins = spec.point_inset
    lo_x, hi_x = fp[0] + ins, fp[2] - ins
    lo_y, hi_y = fp[1] + ins, fp[3] - ins
    if lo_x > hi_x:
        lo_x = hi_x = 0.5 * (fp[0] + fp[2])
    if lo_y > hi_y:
        lo_y = hi_y = 0.5 * (fp[1] + fp[3])
    pts = []
    for _ in range(spec.points_per_object):
        for _attempt in range(200):
            x, y = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
            if all(max(abs(x - px), abs(y - py)) >= spec.min_point_spacing for px, py in pts):
                pts.append((x, y))
                break
        else:
            # the inset region is full; keep what fits
            break
    return pts


def _inside_any(x, y, footprints, pad):
    return any(f[0] - pad <= x <= f[2] + pad and f[1] - pad <= y <= f[3] + pad for f in footprints)


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministic scene for ``spec.rng_seed``."""
    rng = np.random.default_rng(spec.rng_seed)
    objects = _place_objects(spec, rng)
    footprints = [fp for _, fp in objects]

    priors, true_vel, prior_vel = [], [], []
    raw = []  # (x, y, label, vx, vy)
    for k, (prior, fp) in enumerate(objects):
        speed = rng.uniform(0.0, spec.max_object_speed)
        heading = rng.uniform(-math.pi, math.pi)
        v = (speed * math.cos(heading), speed * math.sin(heading))
        pv = tuple(float(c) for c in np.asarray(v) + rng.normal(0.0, spec.prior_velocity_noise_sigma, 2))
        score = float(rng.uniform(0.3, 1.0))
        priors.append(PriorBox(prior.class_id, prior.cx, prior.cy, prior.width, prior.length,
                               prior.yaw, score, pv))
        true_vel.append(v)
        prior_vel.append(pv)
        for x, y in _sample_object_points(fp, spec, rng):
            if spec.position_noise_sigma > 0:
                x, y = np.asarray((x, y)) + rng.normal(0.0, spec.position_noise_sigma, 2)
            rv = np.asarray(v)
            if spec.radar_velocity_noise_sigma > 0:
                rv = rv + rng.normal(0.0, spec.radar_velocity_noise_sigma, 2)
            raw.append((float(x), float(y), k, float(rv[0]), float(rv[1])))
        if spec.structured_clutter:
            for _ in range(spec.structured_per_object):
                # multipath-like ghost hugging the footprint edge
                side = int(rng.integers(4))
                t = rng.uniform(0.0, 1.0)
                off = rng.uniform(-0.5, 0.5)
                if side < 2:
                    x = fp[0] + t * (fp[2] - fp[0])
                    y = (fp[1] if side == 0 else fp[3]) + off
                else:
                    x = (fp[0] if side == 2 else fp[2]) + off
                    y = fp[1] + t * (fp[3] - fp[1])
                gv = rng.uniform(-5.0, 5.0, 2)
                raw.append((float(x), float(y), CLUTTER, float(gv[0]), float(gv[1])))

    limit = spec.half_range - 1e-6
    placed = 0
    attempts = 0
    while placed < spec.clutter_points:
        attempts += 1
        if attempts > MAX_REJECTIONS + spec.clutter_points:
            raise GenerationFailure("could not place clutter outside every label")
        x, y = rng.uniform(-limit, limit, size=2)
        if _inside_any(x, y, footprints, spec.clutter_clearance):
            continue
        gv = rng.uniform(-5.0, 5.0, 2)
        raw.append((float(x), float(y), CLUTTER, float(gv[0]), float(gv[1])))
        placed += 1

    # drop anything the noise pushed off the grid
    raw = [r for r in raw if abs(r[0]) < spec.half_range and abs(r[1]) < spec.half_range]
    offsets = rng.integers(spec.n_sweeps, size=len(raw))
    poses = ego_poses(spec)
    ego_v = (spec.ego_speed, 0.0)
    points, labels = [], []
    for off in range(spec.n_sweeps):
        idx = np.flatnonzero(offsets == off)
        idx = idx[rng.permutation(len(idx))]
        for line, i in enumerate(idx):
            x, y, lab, vx, vy = raw[i]
            z = float(rng.uniform(0.2, 1.5))
            rcs = float(rng.uniform(-5.0, 20.0))
            points.append(RadarPoint(
                x, y, z, vx - ego_v[0], vy - ego_v[1], vx, vy, rcs,
                poses[off].timestamp, sweep_offset=off, source_index=line,
            ))
            labels.append(lab)

    sid = scene_id(spec.rng_seed)
    bundle = SweepBundle(tuple(points), sid, poses[0])
    truth = SceneTruth(sid, tuple(labels), tuple(true_vel), tuple(prior_vel))
    return Scene(bundle, priors, truth)


def split_sweeps(bundle: SweepBundle, poses: Sequence[EgoPose]) -> list:
    """Per-sweep point lists expressed in each sweep's own ego frame (current first)."""
    out = []
    for off, pose in enumerate(poses):
        pts = [p for p in bundle.points if p.sweep_offset == off]
        if off == 0 or not pts:
            out.append([_as_local(p) for p in pts])
            continue
        xyz = transform_points(np.array([p.position for p in pts]), bundle.ego_pose, pose)
        yaw = relative_yaw(bundle.ego_pose, pose)
        vc = rotate_planar(np.array([p.v_comp for p in pts]), yaw)
        vr = rotate_planar(np.array([p.v_raw for p in pts]), yaw)
        out.append([
            RadarPoint(float(xyz[i, 0]), float(xyz[i, 1]), float(xyz[i, 2]),
                       float(vr[i, 0]), float(vr[i, 1]), float(vc[i, 0]), float(vc[i, 1]),
                       p.rcs, p.timestamp, 0, p.source_index)
            for i, p in enumerate(pts)
        ])
    return out


def _as_local(p):
    return RadarPoint(p.x, p.y, p.z, p.vx, p.vy, p.vx_comp, p.vy_comp, p.rcs, p.timestamp, 0, p.source_index)


@dataclass(frozen=True)
class FilterMetrics:
    precision: float
    recall: float
    clutter_rejection_rate: float
    velocity_mae_fused: float
    velocity_mae_prior: float
    n_matched: int = 0
    n_object_points: int = 0
    n_clutter: int = 0
    n_matched_objects: int = 0
    # names of metrics that fell back to their default because the set was empty
    undefined: tuple = ()


def compute_metrics(matches, point_labels, point_velocities, object_velocities, prior_velocities):
    """Metrics from ``matches`` = {point index: prior index}.

    Velocity errors are per-component absolute errors, averaged over each
    matched object's points and then over matched objects.
    """
    labels = np.asarray(point_labels, dtype=np.int64)
    pv = np.asarray(point_velocities, dtype=np.float64).reshape(-1, 2)
    undefined = []
    n_matched = len(matches)
    n_obj = int(np.count_nonzero(labels != CLUTTER))
    n_clutter = int(np.count_nonzero(labels == CLUTTER))

    if n_matched:
        precision = sum(labels[i] != CLUTTER for i in matches) / n_matched
    else:
        precision = 1.0
        undefined.append("precision")
    if n_obj:
        recall = sum(labels[i] == j for i, j in matches.items()) / n_obj
    else:
        recall = 1.0
        undefined.append("recall")
    if n_clutter:
        rejected = sum(1 for i in np.flatnonzero(labels == CLUTTER) if int(i) not in matches)
        clutter_rate = rejected / n_clutter
    else:
        clutter_rate = 1.0
        undefined.append("clutter_rejection_rate")

    per_object = {}
    for i, j in matches.items():
        per_object.setdefault(j, []).append(i)
    fused, prior = [], []
    for j in sorted(per_object):
        if j >= len(object_velocities):
            continue
        truth = np.asarray(object_velocities[j], dtype=np.float64)
        fused.append(float(np.mean(np.abs(pv[per_object[j]] - truth))))
        prior.append(float(np.mean(np.abs(np.asarray(prior_velocities[j], dtype=np.float64) - truth))))
    if fused:
        mae_fused, mae_prior = float(np.mean(fused)), float(np.mean(prior))
    else:
        mae_fused = mae_prior = 0.0
        undefined.extend(["velocity_mae_fused", "velocity_mae_prior"])

    return FilterMetrics(
        float(precision), float(recall), float(clutter_rate), mae_fused, mae_prior,
        n_matched, n_obj, n_clutter, len(fused), tuple(undefined),
    )


def score(assoc: Association, bundle: SweepBundle, truth: SceneTruth) -> FilterMetrics:
    if len(truth.point_labels) != len(bundle):
        raise ValueError("truth and bundle disagree on the number of points")
    matches = {p.point: p.prior for p in assoc.pairs}
    return compute_metrics(matches, truth.point_labels, bundle.v_comp,
                           truth.object_velocities, truth.prior_velocities)


class SweepRow(NamedTuple):
    seed: int
    alpha: float
    beta: float
    metrics: FilterMetrics


def with_seed(spec: SceneSpec, seed: int) -> SceneSpec:
    d = spec.to_dict()
    d["rng_seed"] = seed
    return SceneSpec.from_dict(d)


def sweep_hyperparams(
    alphas: Sequence[float],
    betas: Sequence[float],
    spec: SceneSpec,
    seeds: Optional[Sequence[int]] = None,
    policy: ClassPolicy = ClassPolicy(),
    grid: Optional[GridSpec] = None,
    radar_box_edge: float = 1.0,
) -> list:
    """One row per (alpha, beta, seed); every cell sees the same scenes."""
    if not alphas or not betas:
        raise ValueError("hyper-parameter grid must be non-empty")
    seeds = [spec.rng_seed] if seeds is None else list(seeds)
    grid = grid or GridSpec(spec.half_range)
    scenes = {s: generate_scene(with_seed(spec, s)) for s in seeds}
    rows = []
    for alpha in alphas:
        for beta in betas:
            cfg = MatchConfig(alpha, beta, radar_box_edge)
            for s in seeds:
                sc = scenes[s]
                assoc = associate(sc.bundle, sc.priors, policy, cfg, grid)
                rows.append(SweepRow(s, float(alpha), float(beta), score(assoc, sc.bundle, sc.truth)))
    return rows


CSV_COLUMNS = ("seed", "alpha", "beta", "precision", "recall", "clutter_rejection_rate",
               "velocity_mae_fused", "velocity_mae_prior")


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        m = r.metrics
        writer.writerow([r.seed, repr(r.alpha), repr(r.beta), repr(m.precision), repr(m.recall),
                         repr(m.clutter_rejection_rate), repr(m.velocity_mae_fused),
                         repr(m.velocity_mae_prior)])
    return buf.getvalue()
