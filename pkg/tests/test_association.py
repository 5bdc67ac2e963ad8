import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radarbev.association import (
    DegenerateClip,
    MatchConfig,
    associate,
    make_radar_boxes,
    resolve_overlaps,
    stage1_candidates,
    stage2_match,
)
from radarbev.errors import OutOfRange
from radarbev.geometry import BevBox, GridSpec, iou
from radarbev.priors import ClassPolicy, PriorBox
from radarbev.reference import reference_associate, reference_candidates, reference_clip
from radarbev.synth import SceneSpec, generate_scene

from conftest import bundle_of, point


def label(cx, cy, w=2.0, l=4.0, cls="car", score=0.9, yaw=0.0):
    return PriorBox(cls, cx, cy, w, l, yaw, score)


def test_stage1_examples(grid):
    lab = [label(10.0, 5.0)]
    assert stage1_candidates(bundle_of([(10.0, 5.0)]), lab, grid) == [(0, 0)]
    assert stage1_candidates(bundle_of([(40.0, -25.0)]), lab, grid) == []
    assert stage1_candidates(bundle_of([]), lab, grid) == []


def test_stage1_requires_gated_points(grid):
    with pytest.raises(OutOfRange):
        stage1_candidates(bundle_of([(60.0, 0.0)]), [label(0, 0)], grid)


def test_stage1_matches_point_in_rect_scan(grid, rng):
    for _ in range(5):
        labels = []
        while len(labels) < 10:
            cand = label(*rng.uniform(-45, 45, 2), *rng.uniform(1, 5, 2), yaw=rng.uniform(-3, 3))
            if all(iou(cand.footprint(), o.footprint()) == 0 for o in labels):
                labels.append(cand)
        pts = [point(*rng.uniform(-51, 51, 2)) for _ in range(200)]
        # half the points near labels so the candidate set is not trivially empty
        pts += [point(*(np.array([l.cx, l.cy]) + rng.uniform(-2.5, 2.5, 2))) for l in labels for _ in range(10)]
        got = stage1_candidates(bundle_of([(p.x, p.y) for p in pts]), labels, grid)
        assert got == reference_candidates(pts, labels, grid.half_range, grid.cells_per_side)
        assert len(got) > 0


def test_make_radar_boxes_examples():
    (b,) = make_radar_boxes(bundle_of([(10.0, -4.0)]))
    assert b.as_tuple() == (9.5, -4.5, 10.5, -3.5)
    (b,) = make_radar_boxes(bundle_of([(0.0, 0.0)]), MatchConfig(alpha=2.0))
    assert b.as_tuple() == (-1.0, -1.0, 1.0, 1.0)
    (b,) = make_radar_boxes(bundle_of([(0.0, 0.0)]), MatchConfig(alpha=0.5))
    assert b.as_tuple() == (-0.25, -0.25, 0.25, 0.25)


def test_midline_example():
    centers = [(0.0, 0.0), (0.6, 0.0)]
    out = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
    assert out[0].as_tuple() == pytest.approx((-0.5, -0.5, 0.3, 0.5), abs=1e-15)
    assert out[1].as_tuple() == pytest.approx((0.3, -0.5, 1.1, 0.5), abs=1e-15)
    assert out[0].max_x == out[1].min_x


def test_midline_dominant_axis_and_ties():
    centers = [(0.0, 0.0), (0.2, 0.6)]
    a, b = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
    assert a.max_y == b.min_y == 0.3 and a.max_x == 0.5
    centers = [(0.0, 0.0), (0.5, 0.5)]
    a, b = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
    assert a.max_x == b.min_x == 0.25 and a.max_y == 0.5


def test_disjoint_boxes_unchanged():
    centers = [(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)]
    boxes = make_radar_boxes(bundle_of(centers))
    assert resolve_overlaps(boxes, centers) == boxes


def test_coincident_points_collapse_one_box():
    centers = [(1.0, 2.0), (1.0, 2.0)]
    with pytest.warns(DegenerateClip):
        a, b = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
    assert a.as_tuple() == (0.5, 1.5, 1.5, 2.5)
    assert b.area == 0.0 and b.as_tuple() == (1.0, 2.0, 1.0, 2.0)


def _check_post(centers, out):
    for i, b in enumerate(out):
        assert b.min_x <= centers[i][0] <= b.max_x
        assert b.min_y <= centers[i][1] <= b.max_y
        for j in range(i + 1, len(out)):
            o = out[j]
            iw = min(b.max_x, o.max_x) - max(b.min_x, o.min_x)
            ih = min(b.max_y, o.max_y) - max(b.min_y, o.min_y)
            assert iw <= 0 or ih <= 0


def test_clustered_points_postconditions(rng):
    for _ in range(50):
        centers = [tuple(c) for c in rng.normal(0.0, 0.8, (int(rng.integers(2, 50)), 2))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateClip)
            out = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
        _check_post(centers, out)


def test_clip_matches_all_pairs_reference(rng):
    for _ in range(100):
        n = int(rng.integers(1, 30))
        centers = [tuple(c) for c in np.round(rng.normal(0.0, 1.0, (n, 2)), 1)]
        keys = [(c[0], c[1], i) for i, c in enumerate(centers)]
        expect, n_deg = reference_clip(centers, 1.0, keys)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateClip)
            got = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
        assert [b.as_tuple() for b in got] == expect


def test_clip_is_order_independent(rng):
    centers = rng.normal(0.0, 0.7, (40, 2))
    base = resolve_overlaps(make_radar_boxes(bundle_of(centers)), centers)
    perm = rng.permutation(40)
    shuffled = resolve_overlaps(make_radar_boxes(bundle_of(centers[perm])), centers[perm])
    assert [shuffled[k] for k in np.argsort(perm)] == base


def test_stage2_examples(grid):
    lab = [label(0.0, 0.0, w=2.0, l=4.0)]
    boxes = make_radar_boxes(bundle_of([(0.0, 0.0)]))
    a = stage2_match([(0, 0)], boxes, lab, MatchConfig(beta=0.1), 1, grid)
    (pair,) = a.pairs
    assert pair.iou == 0.125 and pair.prior == 0
    a = stage2_match([(0, 0)], boxes, lab, MatchConfig(beta=0.2), 1, grid)
    assert a.pairs == () and a.unmatched_points == (0,)
    empty = stage2_match([], [], lab, MatchConfig(), 3, grid)
    assert len(empty) == 0 and empty.unmatched_points == (0, 1, 2)


def test_associate_examples(grid):
    ped = [label(0.0, 0.0, cls="pedestrian"), label(5.0, 5.0, cls="traffic_cone")]
    a = associate(bundle_of([(0.0, 0.0), (5.0, 5.0)]), ped)
    assert len(a) == 0 and a.excluded_by_policy == 2
    clutter = bundle_of(np.random.default_rng(1).uniform(-50, 50, (100, 2)))
    a = associate(clutter, [])
    assert a.unmatched_points == tuple(range(100))


def test_associate_noise_free_scene_matches_everything():
    sc = generate_scene(SceneSpec(rng_seed=3, n_objects=10, clutter_points=0, position_noise_sigma=0.0))
    a = associate(sc.bundle, sc.priors, cfg=MatchConfig(1.0, 0.05))
    assert len(a) == len(sc.bundle) and a.unmatched_points == ()


def test_prior_indices_refer_to_input_list():
    priors = [label(0.0, 0.0, cls="pedestrian"), label(20.0, 0.0, score=0.5), label(20.0, 0.5, score=0.8)]
    a = associate(bundle_of([(20.0, 0.0)]), priors)
    assert a.label_indices == (2,)
    assert [p.prior for p in a.pairs] == [2]


def _random_scene(rng, n_pts, n_labels):
    labels = [label(*rng.uniform(-6, 6, 2), *rng.uniform(0.5, 4, 2), yaw=rng.uniform(-3, 3),
                    cls=str(rng.choice(["car", "truck", "pedestrian"])), score=float(rng.uniform()))
              for _ in range(n_labels)]
    xy = np.round(rng.uniform(-7, 7, (n_pts, 2)), 1)
    if n_pts > 2:
        xy[1] = xy[0]
    return bundle_of(xy), labels


def _as_tuples(a):
    return sorted((p.point, p.prior, p.iou, p.box.as_tuple()) for p in a.pairs)


def test_oracle_equivalence(grid, rng):
    cfg = MatchConfig(1.0, 0.1)
    for _ in range(100):
        bundle, priors = _random_scene(rng, int(rng.integers(0, 21)), int(rng.integers(0, 9)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateClip)
            got = associate(bundle, priors, ClassPolicy(), cfg, grid)
            expect, n_deg = reference_associate(list(bundle.points), priors, ClassPolicy(), cfg, grid)
        assert _as_tuples(got) == expect
        assert got.degenerate_clips == n_deg


def test_point_permutation_invariance(grid, rng):
    bundle, priors = _random_scene(rng, 20, 6)
    base = associate(bundle, priors)
    perm = rng.permutation(20)
    shuffled = associate(bundle_of(bundle.xy[perm]), priors)
    remap = {int(new): int(old) for new, old in enumerate(perm)}
    moved = sorted((remap[p.point], p.prior, p.iou, p.box.as_tuple()) for p in shuffled.pairs)
    assert moved == _as_tuples(base)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_beta_monotone(seed):
    rng = np.random.default_rng(seed)
    bundle, priors = _random_scene(rng, 20, 8)
    prev = None
    for beta in (0.02, 0.05, 0.1, 0.2, 0.4):
        s = associate(bundle, priors, cfg=MatchConfig(1.0, beta)).matched_set()
        if prev is not None:
            assert s <= prev
        prev = s


def test_deterministic(rng):
    bundle, priors = _random_scene(rng, 20, 8)
    assert associate(bundle, priors) == associate(bundle, priors)
