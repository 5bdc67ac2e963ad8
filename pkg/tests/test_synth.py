import math

import numpy as np
import pytest

from radarbev.association import MatchConfig, associate, empty_association
from radarbev.errors import ConfigError
from radarbev.geometry import GridSpec
from radarbev.priors import ClassPolicy
from radarbev.reference import reference_associate
from radarbev.synth import (
    CLUTTER,
    SceneSpec,
    compute_metrics,
    generate_scene,
    metrics_csv,
    score,
    split_sweeps,
    ego_poses,
    sweep_hyperparams,
    with_seed,
)
from radarbev.ingest import accumulate_sweeps


def test_determinism():
    a = generate_scene(SceneSpec(rng_seed=7))
    b = generate_scene(SceneSpec(rng_seed=7))
    assert a == b
    assert generate_scene(SceneSpec(rng_seed=8)) != a


def test_clutter_only():
    sc = generate_scene(SceneSpec(rng_seed=1, n_objects=0, clutter_points=100))
    assert sc.priors == []
    assert len(sc.bundle) == 100 and set(sc.truth.point_labels) == {CLUTTER}
    m = score(empty_association(100, GridSpec()), sc.bundle, sc.truth)
    assert m.clutter_rejection_rate == 1.0
    assert "recall" in m.undefined and "precision" in m.undefined


def test_noise_free_points_strictly_interior():
    for seed in range(5):
        sc = generate_scene(SceneSpec(rng_seed=seed, position_noise_sigma=0.0, yaw_mode="random", n_sweeps=3))
        for p, lab in zip(sc.bundle.points, sc.truth.point_labels):
            if lab == CLUTTER:
                continue
            fp = sc.priors[lab].footprint()
            assert fp.min_x < p.x < fp.max_x and fp.min_y < p.y < fp.max_y


def test_labels_disjoint_with_margin():
    sc = generate_scene(SceneSpec(rng_seed=4, n_objects=25))
    fps = [p.footprint() for p in sc.priors]
    for i in range(len(fps)):
        for j in range(i + 1, len(fps)):
            a, b = fps[i], fps[j]
            gap = max(b.min_x - a.max_x, a.min_x - b.max_x, b.min_y - a.max_y, a.min_y - b.max_y)
            assert gap >= 1.2


def test_perfect_association_scores_one():
    sc = generate_scene(SceneSpec(rng_seed=5, position_noise_sigma=0.0))
    m = score(associate(sc.bundle, sc.priors, cfg=MatchConfig(1.0, 0.05)), sc.bundle, sc.truth)
    assert (m.precision, m.recall, m.clutter_rejection_rate) == (1.0, 1.0, 1.0)
    assert m.velocity_mae_fused == 0.0


def test_noisy_metrics_equal_oracle_pipeline():
    spec = SceneSpec(n_objects=20, position_noise_sigma=0.2)
    cfg = MatchConfig(1.0, 0.1)
    for seed in range(10):
        sc = generate_scene(with_seed(spec, seed))
        fast = score(associate(sc.bundle, sc.priors, cfg=cfg), sc.bundle, sc.truth)
        pairs, _ = reference_associate(list(sc.bundle.points), sc.priors, ClassPolicy(), cfg, GridSpec())
        slow = compute_metrics({i: j for i, j, _, _ in pairs}, sc.truth.point_labels, sc.bundle.v_comp,
                               sc.truth.object_velocities, sc.truth.prior_velocities)
        assert fast == slow


def test_compute_metrics_by_hand():
    labels = [0, 0, 1, CLUTTER, CLUTTER]
    vel = [(1.0, 0.0), (3.0, 0.0), (0.0, 0.0), (9.0, 9.0), (0.0, 0.0)]
    m = compute_metrics({0: 0, 1: 0, 3: 1}, labels, vel, [(2.0, 0.0), (0.0, 0.0)], [(2.5, 0.0), (0.0, 1.0)])
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(2 / 3)
    assert m.clutter_rejection_rate == 0.5
    # object 0: |1-2|,0,|3-2|,0 -> 0.5; object 1 via clutter point: 9,9 -> 9
    assert m.velocity_mae_fused == pytest.approx((0.5 + 9.0) / 2)
    assert m.velocity_mae_prior == pytest.approx((0.25 + 0.5) / 2)


def test_split_sweeps_reaccumulates():
    spec = SceneSpec(rng_seed=9, n_sweeps=3, ego_yaw_rate=0.3)
    sc = generate_scene(spec)
    poses = ego_poses(spec)
    parts = split_sweeps(sc.bundle, poses)
    args = [(pts, pose) for pts, pose in zip(parts, poses)]
    again = accumulate_sweeps(*args, frame_id=sc.bundle.frame_id)
    assert len(again) == len(sc.bundle)
    assert np.allclose(again.xy, sc.bundle.xy, atol=1e-9)
    assert np.allclose(again.v_comp, sc.bundle.v_comp, atol=1e-9)


def test_spec_validation_names_field():
    with pytest.raises(ConfigError, match="position_noise_sigma"):
        SceneSpec(position_noise_sigma=-1.0)
    with pytest.raises(ConfigError, match="bogus"):
        SceneSpec.from_dict({"bogus": 1})
    assert SceneSpec.from_dict(SceneSpec().to_dict()) == SceneSpec()


def test_sweep_rows():
    spec = SceneSpec(rng_seed=2, n_objects=10, position_noise_sigma=0.3)
    rows = sweep_hyperparams([0.5, 1.0, 2.0], [0.05, 0.1, 0.2], spec)
    assert len(rows) == 9
    assert len(sweep_hyperparams([1.0], [0.1], spec)) == 1
    for alpha in (0.5, 1.0, 2.0):
        counts = [r.metrics.n_matched for r in rows if r.alpha == alpha]
        assert counts == sorted(counts, reverse=True)
    text = metrics_csv(rows)
    assert text.count("\n") == 10 and text.startswith("seed,alpha,beta,precision")
    with pytest.raises(ValueError):
        sweep_hyperparams([], [0.1], spec)
