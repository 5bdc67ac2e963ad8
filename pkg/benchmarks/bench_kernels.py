"""Time the numba kernels against their pure-numpy counterparts.

    python benchmarks/bench_kernels.py [--points N] [--priors N] [--repeat N]

Also times a whole ``fuse`` call on each backend. Every kernel pair is
checked for identical output before it is timed.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from radarbev import kernels
from radarbev._accel import HAVE_NUMBA
from radarbev.association import MatchConfig, canonical_rank, radar_box_array, stage1_candidates
from radarbev.geometry import GridSpec
from radarbev.priors import dedup_priors, footprint_array
from radarbev.synth import SceneSpec, generate_scene

FUSE_SNIPPET = """
import statistics, sys, time
from radarbev._accel import backend_name
from radarbev.config import RunConfig
from radarbev.pipeline import fuse
from radarbev.synth import SceneSpec, generate_scene
sc = generate_scene(SceneSpec(**{spec!r}))
for _ in range(3):
    fuse(sc.bundle, sc.priors, RunConfig())
ts = []
for _ in range({repeat}):
    t0 = time.perf_counter()
    fuse(sc.bundle, sc.priors, RunConfig())
    ts.append(time.perf_counter() - t0)
print(backend_name(), len(sc.bundle), statistics.median(ts) * 1e3)
"""


def scene_spec(n_points, n_priors):
    per = max(1, n_points // (2 * max(n_priors, 1)))
    clutter = max(0, n_points - per * n_priors)
    return dict(rng_seed=0, n_objects=n_priors, points_per_object=per, clutter_points=clutter,
                position_noise_sigma=0.2, n_sweeps=3, placement_range=48.0, label_margin=0.5,
                min_point_spacing=0.3)


def best_ms(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=1500)
    ap.add_argument("--priors", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    spec = scene_spec(args.points, args.priors)
    sc = generate_scene(SceneSpec(**spec))
    grid = GridSpec()
    hr, cs, n = grid.half_range, grid.cell_size, grid.cells_per_side
    labels = dedup_priors(sc.priors)
    fps = footprint_array(labels)
    painted = kernels.paint_labels_np(fps, hr, cs, n)
    xy = sc.bundle.xy
    cands = stage1_candidates(sc.bundle, labels, grid)
    pidx = np.array([c[0] for c in cands], dtype=np.int64)
    centers = np.ascontiguousarray(xy[pidx])
    boxes = radar_box_array(centers, MatchConfig())
    rank = canonical_rank(sc.bundle, pidx)
    clipped, _ = kernels.clip_overlaps_np(boxes, centers, rank)
    values = np.concatenate([centers, sc.bundle.v_comp[pidx]], axis=1)
    order = np.arange(len(pidx), dtype=np.int64)

    cases = {
        "paint_labels": ((fps, hr, cs, n), kernels.paint_labels_nb, kernels.paint_labels_np),
        "lookup_cells": ((painted, xy, hr, cs), kernels.lookup_cells_nb, kernels.lookup_cells_np),
        "clip_overlaps": ((boxes, centers, rank), kernels.clip_overlaps_nb, kernels.clip_overlaps_np),
        "rasterize_boxes": ((clipped, values, order, hr, cs, n),
                            kernels.rasterize_boxes_nb, kernels.rasterize_boxes_np),
    }
    print(f"{len(sc.bundle)} points, {len(sc.priors)} priors, {len(cands)} stage-1 candidates")
    print(f"{'kernel':<16} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, (a, nb, np_) in cases.items():
        ra, rb = nb(*a), np_(*a)
        ra, rb = (ra if isinstance(ra, tuple) else (ra,)), (rb if isinstance(rb, tuple) else (rb,))
        if not all(np.array_equal(x, y) for x, y in zip(ra, rb)):
            sys.exit(f"{name}: backends disagree")
        t_nb = best_ms(lambda: nb(*a), args.repeat)
        t_np = best_ms(lambda: np_(*a), args.repeat)
        print(f"{name:<16} {t_nb:>10.3f} {t_np:>10.3f} {t_np / t_nb:>7.1f}x")

    # whole-frame fuse, each backend in its own interpreter since the flag is read at import
    code = FUSE_SNIPPET.format(spec=spec, repeat=args.repeat)
    for flag in ("0", "1"):
        env = dict(os.environ, RADARBEV_PURE_NUMPY=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, pts, ms = out.stdout.split()
        print(f"fuse[{backend}]: {float(ms):.2f} ms median over {args.repeat} runs ({pts} points)")


if __name__ == "__main__":
    main()
