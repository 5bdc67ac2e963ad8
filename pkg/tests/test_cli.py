import json

import numpy as np
import pytest

from radarbev.cli import main
from radarbev.feature import read_feature_map
from radarbev.ingest import serialize_sweep
from radarbev.priors import PriorBox, serialize_priors

from conftest import point


def simulate(tmp_path, seed=7, **spec):
    out = tmp_path / f"scene{seed}"
    args = ["simulate", "--seed", str(seed), "--out", str(out)]
    if spec:
        path = tmp_path / f"spec{seed}.json"
        path.write_text(json.dumps(spec))
        args.insert(1, str(path))
    assert main(args) == 0
    return out


def frame_args(d):
    truth = json.loads((d / "truth.json").read_text())
    sid, sweeps = truth["scene_id"], len(truth["sweeps"])
    radar = [str(d / f"{sid}.jsonl")] + [str(d / f"{sid}-prev{k}.jsonl") for k in range(1, sweeps)]
    return ["--radar", *radar, "--priors", str(d / "priors.jsonl"), "--poses", str(d / "poses.jsonl")]


def test_fuse_defaults(tmp_path):
    d = simulate(tmp_path, n_sweeps=3, position_noise_sigma=0.0)
    out = tmp_path / "f.bevr"
    assert main(["fuse", *frame_args(d), "--out", str(out)]) == 0
    fmap = read_feature_map(out)
    assert fmap.grid.cells_per_side == 256 and fmap.grid.half_range == 51.2
    report = json.loads(out.with_suffix(".report.json").read_text())
    assert report["grid"] == {"half_range": 51.2, "cells_per_side": 256}
    assert report["match"]["radar_box_edge"] == 1.0 and report["sweeps"] == 3
    assert report["excluded_classes"] == ["pedestrian", "traffic_cone"]
    assert fmap.occupancy.any()


def write_frame(tmp_path, points, priors):
    r = tmp_path / "r.jsonl"
    r.write_text(serialize_sweep(points))
    p = tmp_path / "p.jsonl"
    p.write_text(serialize_priors(priors))
    return ["--radar", str(r), "--priors", str(p), "--sweeps", "1"]


def test_pedestrian_only_priors(tmp_path):
    args = write_frame(tmp_path, [point(3.0, 1.0)], [PriorBox("pedestrian", 3.0, 1.0, 0.8, 0.8, 0.0, 0.9)])
    out = tmp_path / "o.bevr"
    assert main(["fuse", *args, "--out", str(out)]) == 0
    assert not read_feature_map(out).data.any()
    report = json.loads(out.with_suffix(".report.json").read_text())
    assert any("pedestrian" in n for n in report["notes"])
    assert report["counts"]["priors_excluded_by_policy"] == 1


def test_missing_poses_exit_1_and_no_output(tmp_path, capsys):
    d = simulate(tmp_path, n_sweeps=3)
    args = frame_args(d)
    i = args.index("--poses")
    del args[i:i + 2]
    out = tmp_path / "x.bevr"
    assert main(["fuse", *args, "--out", str(out)]) == 1
    assert "poses" in capsys.readouterr().err
    assert not out.exists() and not out.with_suffix(".report.json").exists()
    assert main(["fuse", *frame_args(d), "--poses", str(tmp_path / "nope.jsonl"), "--out", str(out)]) == 1
    assert "nope.jsonl" in capsys.readouterr().err
    assert list(tmp_path.glob("x*")) == []


def test_bad_grid_exit_2(tmp_path):
    args = write_frame(tmp_path, [], [])
    assert main(["fuse", *args, "--grid-cells", "0", "--out", str(tmp_path / "o.bevr")]) == 2
    assert main(["fuse", *args, "--sweeps", "4", "--out", str(tmp_path / "o.bevr")]) == 2


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("match.beta = 0.3  # tighter\ngrid.cells_per_side = 128\npolicy.pedestrian = true\n")
    args = write_frame(tmp_path, [point(3.0, 1.0)], [PriorBox("pedestrian", 3.0, 1.0, 0.8, 0.8, 0.0, 0.9)])
    out = tmp_path / "o.bevr"
    assert main(["fuse", "--config", str(cfg), *args, "--beta", "0.2", "--out", str(out)]) == 0
    report = json.loads(out.with_suffix(".report.json").read_text())
    assert report["match"]["beta"] == 0.2 and report["grid"]["cells_per_side"] == 128
    assert report["counts"]["matched"] == 1
    cfg.write_text("nonsense.key = 1\n")
    assert main(["fuse", "--config", str(cfg), *args, "--out", str(out)]) == 2


def test_simulate_byte_identical(tmp_path):
    a = simulate(tmp_path / "a")
    b = simulate(tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_simulate_zero_objects(tmp_path):
    d = simulate(tmp_path, n_objects=0)
    assert (d / "priors.jsonl").read_text() == ""


def test_simulate_negative_sigma(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"position_noise_sigma": -0.1}))
    assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "position_noise_sigma" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def run_eval(tmp_path, capsys, d, **flags):
    out = tmp_path / "e.bevr"
    extra = [x for k, v in flags.items() for x in (f"--{k}", str(v))]
    assert main(["fuse", *frame_args(d), "--out", str(out), *extra]) == 0
    capsys.readouterr()
    code = main(["eval", "--report", str(out.with_suffix(".report.json")), "--truth", str(d / "truth.json")])
    header, row = capsys.readouterr().out.strip().splitlines()
    return code, dict(zip(header.split(","), row.split(",")))


def test_eval_perfect(tmp_path, capsys):
    d = simulate(tmp_path, n_sweeps=3, position_noise_sigma=0.0, ego_yaw_rate=0.3)
    code, row = run_eval(tmp_path, capsys, d, beta=0.05)
    assert code == 0
    assert float(row["precision"]) == 1.0 and float(row["recall"]) == 1.0
    assert float(row["clutter_rejection_rate"]) == 1.0


def test_eval_clutter_only(tmp_path, capsys):
    d = simulate(tmp_path, n_objects=0, clutter_points=50)
    code, row = run_eval(tmp_path, capsys, d)
    assert code == 0 and float(row["clutter_rejection_rate"]) == 1.0


def test_eval_mismatched_ids(tmp_path, capsys):
    d1 = simulate(tmp_path, seed=1)
    d2 = simulate(tmp_path, seed=2)
    out = tmp_path / "m.bevr"
    assert main(["fuse", *frame_args(d1), "--out", str(out)]) == 0
    assert main(["eval", "--report", str(out.with_suffix(".report.json")),
                 "--truth", str(d2 / "truth.json")]) == 1


def render(tmp_path, args, name):
    out = tmp_path / f"{name}.bevr"
    assert main(["fuse", *args, "--out", str(out)]) == 0
    svg = tmp_path / f"{name}.svg"
    assert main(["render", *args, "--report", str(out.with_suffix(".report.json")), "--out", str(svg)]) == 0
    return svg.read_text()


def test_render_markers(tmp_path):
    args = write_frame(tmp_path, [point(10.0, 5.0), point(-30.0, 20.0)],
                       [PriorBox("car", 10.0, 5.0, 2.0, 4.5, 0.0, 0.9)])
    text = render(tmp_path, args, "one")
    assert text.count('class="matched-point"') == 1
    assert text.count('class="raw-point"') == 1
    assert text == render(tmp_path, args, "two")


def test_render_empty_frame(tmp_path):
    text = render(tmp_path, write_frame(tmp_path, [], []), "empty")
    assert "<circle" not in text and 'class="frame"' in text
    assert '<rect class="prior' not in text


def test_render_rejects_foreign_report(tmp_path):
    a = write_frame(tmp_path, [point(1.0, 1.0)], [])
    out = tmp_path / "a.bevr"
    assert main(["fuse", *a, "--out", str(out)]) == 0
    (tmp_path / "r.jsonl").write_text(serialize_sweep([point(1.0, 1.0), point(2.0, 2.0)]))
    assert main(["render", *a, "--report", str(out.with_suffix(".report.json")),
                 "--out", str(tmp_path / "x.svg")]) == 1
    assert not (tmp_path / "x.svg").exists()


def test_sweep_cli(tmp_path, capsys):
    assert main(["sweep", "--seed", "3", "--alphas", "1", "--betas", "0.05,0.4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    out = tmp_path / "s.csv"
    assert main(["sweep", "--seeds", "1,2", "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 1 + 9 * 2
    assert main(["sweep", "--alphas", "x"]) == 1
