"""Two-stage association of radar points to object priors.

Stage 1 paints the deduplicated label footprints onto the BEV grid and keeps
the points whose cell falls inside a label. Stage 2 builds an alpha-scaled
square box around every candidate, clips overlapping boxes at the midline
between their generating points, and accepts a candidate when the IOU of its
clipped box with its label footprint reaches beta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .errors import OutOfRange
from .geometry import BevBox, GridSpec, iou_arrays
from .ingest import SweepBundle
from .priors import ClassPolicy, PriorBox, dedup_indices, footprint_array


class DegenerateClip(UserWarning):
    """Two radar boxes share a generating point; the later one was collapsed."""


@dataclass(frozen=True)
class MatchConfig:
    alpha: float = 1.0
    beta: float = 0.1
    radar_box_edge: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not self.radar_box_edge > 0:
            raise ValueError(f"radar_box_edge must be > 0, got {self.radar_box_edge!r}")

    @property
    def box_edge(self) -> float:
        return self.alpha * self.radar_box_edge


class Pair(NamedTuple):
    point: int
    prior: int
    iou: float
    box: BevBox


@dataclass(frozen=True)
class Association:
    pairs: tuple
    unmatched_points: tuple
    matches_by_prior: dict
    grid: GridSpec
    n_points: int = 0
    label_indices: tuple = ()
    n_candidates: int = 0
    excluded_by_policy: int = 0
    degenerate_clips: int = 0

    def matched_set(self):
        return {(p.point, p.prior) for p in self.pairs}

    def __len__(self):
        return len(self.pairs)


def empty_association(n_points: int, grid: GridSpec, **extra) -> Association:
    return Association((), tuple(range(n_points)), {}, grid, n_points, **extra)


def _xy(points) -> np.ndarray:
    if isinstance(points, SweepBundle):
        return points.xy
    if isinstance(points, np.ndarray):
        return points.astype(np.float64, copy=False).reshape(-1, 2)
    return np.array([(p.x, p.y) for p in points], dtype=np.float64).reshape(-1, 2)


def stage1_candidates(points, labels: Sequence[PriorBox], grid: GridSpec = GridSpec()) -> list:
    """``(point index, label index)`` for every point whose grid cell lies in a label footprint."""
    xy = _xy(points)
    if len(xy) == 0 or len(labels) == 0:
        return []
    if not np.all(np.abs(xy) < grid.half_range):
        raise OutOfRange(f"stage 1 needs points inside +/-{grid.half_range} m; gate first")
    painted = kernels.paint_labels(
        footprint_array(labels), grid.half_range, grid.cell_size, grid.cells_per_side
    )
    owner = kernels.lookup_cells(painted, xy, grid.half_range, grid.cell_size)
    idx = np.flatnonzero(owner >= 0)
    return [(int(i), int(owner[i])) for i in idx]


def radar_box_array(xy: np.ndarray, cfg: MatchConfig) -> np.ndarray:
    half = 0.5 * cfg.box_edge
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    return np.concatenate([xy - half, xy + half], axis=1)


def make_radar_boxes(points, cfg: MatchConfig = MatchConfig()) -> list:
    return [BevBox(*row) for row in radar_box_array(_xy(points), cfg).tolist()]


def canonical_rank(bundle: SweepBundle, indices) -> np.ndarray:
    """Rank of each selected point under a content-only ordering.

    Used to decide which of two coincident points keeps its box, so the
    outcome does not depend on the input order of the points.
    """
    pts = [bundle.points[i] for i in indices]
    if not pts:
        return np.empty(0, dtype=np.int64)
    keys = np.array(
        [(p.x, p.y, p.sweep_offset, p.vx_comp, p.vy_comp, p.z, p.rcs, p.timestamp, p.vx, p.vy)
         for p in pts],
        dtype=np.float64,
    )
    order = np.lexsort(keys.T[::-1])
    rank = np.empty(len(pts), dtype=np.int64)
    rank[order] = np.arange(len(pts))
    return rank


def resolve_overlap_array(boxes, centers, rank=None):
    """Array form of :func:`resolve_overlaps`; returns ``(clipped, n_degenerate)``."""
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2)
    if rank is None:
        rank = np.empty(len(centers), dtype=np.int64)
        rank[np.lexsort((np.arange(len(centers)), centers[:, 1], centers[:, 0]))] = np.arange(len(centers))
    rank = np.ascontiguousarray(rank, dtype=np.int64)
    if len(boxes) == 0:
        return boxes.copy(), 0
    return kernels.clip_overlaps(boxes, centers, rank)


def resolve_overlaps(boxes: Sequence[BevBox], centers, rank=None) -> list:
    """Clip every overlapping pair of radar boxes at the midline of their generators.

    The cut runs perpendicular to the axis with the larger centre separation
    (x on ties). All pairs are found on the unclipped boxes and every cut is
    a pure shrink, so the result does not depend on processing order.
    Coincident generators cannot be separated: the box whose generator comes
    later in (x, y, index) order collapses to a zero-area box at its point
    and a :class:`DegenerateClip` warning is issued.
    """
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)
    out, n_degenerate = resolve_overlap_array(arr, centers, rank)
    if n_degenerate:
        warnings.warn(f"{n_degenerate} radar box(es) collapsed on coincident points", DegenerateClip)
    return [BevBox(*row) for row in out.tolist()]


def stage2_match(
    candidates,
    radar_boxes,
    labels: Sequence[PriorBox],
    cfg: MatchConfig = MatchConfig(),
    n_points: Optional[int] = None,
    grid: GridSpec = GridSpec(),
    label_ids: Optional[Sequence[int]] = None,
) -> Association:
    """Accept each stage-1 pair whose clipped radar box reaches IOU >= beta with its label.

    ``radar_boxes`` is aligned with ``candidates``. ``label_ids`` maps label
    positions to the prior indices reported in the result (identity by default).
    """
    if n_points is None:
        n_points = 1 + max((c[0] for c in candidates), default=-1)
    if label_ids is None:
        label_ids = range(len(labels))
    if not candidates:
        return empty_association(n_points, grid, label_indices=tuple(label_ids))
    boxes = np.array(
        [b.as_tuple() if isinstance(b, BevBox) else tuple(b) for b in radar_boxes], dtype=np.float64
    ).reshape(-1, 4)
    pidx = np.array([c[0] for c in candidates], dtype=np.int64)
    lidx = np.array([c[1] for c in candidates], dtype=np.int64)
    scores = iou_arrays(boxes, footprint_array(labels)[lidx])
    accepted = np.flatnonzero(scores >= cfg.beta)
    return _build(pidx, lidx, scores, boxes, accepted, n_points, grid, label_ids, len(candidates))


def _build(pidx, lidx, scores, boxes, accepted, n_points, grid, label_ids, n_candidates, **extra):
    label_ids = tuple(int(i) for i in label_ids)
    accepted = accepted[np.argsort(pidx[accepted], kind="stable")]
    pairs = tuple(
        Pair(int(pidx[k]), label_ids[lidx[k]], float(scores[k]), BevBox(*boxes[k].tolist()))
        for k in accepted
    )
    by_prior = {lid: [] for lid in label_ids}
    for p in pairs:
        by_prior[p.prior].append(p.point)
    matched = {p.point for p in pairs}
    return Association(
        pairs=pairs,
        unmatched_points=tuple(i for i in range(n_points) if i not in matched),
        matches_by_prior={k: tuple(v) for k, v in by_prior.items()},
        grid=grid,
        n_points=n_points,
        label_indices=label_ids,
        n_candidates=n_candidates,
        **extra,
    )


def associate(
    bundle: SweepBundle,
    priors: Sequence[PriorBox],
    policy: ClassPolicy = ClassPolicy(),
    cfg: MatchConfig = MatchConfig(),
    grid: GridSpec = GridSpec(),
) -> Association:
    """Full radar association for one frame.

    policy filter -> prior dedup -> stage 1 -> radar boxes -> midline clip
    -> stage 2. Prior indices in the result refer to positions in ``priors``.
    """
    n = len(bundle)
    enabled = [i for i, p in enumerate(priors) if policy.enabled(p.class_id)]
    excluded = len(priors) - len(enabled)
    kept = [enabled[i] for i in dedup_indices([priors[i] for i in enabled])]
    labels = [priors[i] for i in kept]
    candidates = stage1_candidates(bundle, labels, grid)
    if not candidates:
        return empty_association(n, grid, label_indices=tuple(kept), excluded_by_policy=excluded)

    pidx = np.array([c[0] for c in candidates], dtype=np.int64)
    lidx = np.array([c[1] for c in candidates], dtype=np.int64)
    centers = bundle.xy[pidx]
    boxes, n_degenerate = resolve_overlap_array(
        radar_box_array(centers, cfg), centers, canonical_rank(bundle, pidx)
    )
    scores = iou_arrays(boxes, footprint_array(labels)[lidx])
    accepted = np.flatnonzero(scores >= cfg.beta)
    return _build(
        pidx, lidx, scores, boxes, accepted, n, grid, kept, len(candidates),
        excluded_by_policy=excluded, degenerate_clips=n_degenerate,
    )

