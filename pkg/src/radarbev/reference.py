"""Brute-force reference association.

Plain Python loops over every point/label and box/box pair, sharing no code
with the vectorized pipeline beyond the data classes. Used as the oracle in
tests and by the synthetic harness; only suitable for small frames.
"""

import math


def _iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _footprint(prior):
    c, s = abs(math.cos(prior.yaw)), abs(math.sin(prior.yaw))
    hx = 0.5 * (c * prior.length + s * prior.width)
    hy = 0.5 * (s * prior.length + c * prior.width)
    return (prior.cx - hx, prior.cy - hy, prior.cx + hx, prior.cy + hy)


def _cell_center_of(v, half_range, n):
    cs = (2.0 * half_range) / n
    i = min(math.floor((v + half_range) / cs), n - 1)
    return -half_range + (i + 0.5) * cs


def reference_dedup(priors):
    order = sorted(range(len(priors)), key=lambda i: (-priors[i].score, i))
    kept = []
    for i in order:
        if all(_iou(_footprint(priors[i]), _footprint(priors[k])) == 0.0 for k in kept):
            kept.append(i)
    return kept


def reference_candidates(points, labels, half_range, n, continuous=False):
    """Point-in-rect scan over every (point, label) pair.

    With ``continuous=False`` a point's grid cell centre is tested against the
    half-open footprint; with ``continuous=True`` the raw point position is.
    """
    out = []
    for i, p in enumerate(points):
        if continuous:
            x, y = p.x, p.y
        else:
            x = _cell_center_of(p.x, half_range, n)
            y = _cell_center_of(p.y, half_range, n)
        for j, lab in enumerate(labels):
            fp = _footprint(lab)
            if fp[0] <= x < fp[2] and fp[1] <= y < fp[3]:
                out.append((i, j))
                break
    return out


def _point_key(p, index):
    return (p.x, p.y, p.sweep_offset, p.vx_comp, p.vy_comp, p.z, p.rcs, p.timestamp, p.vx, p.vy, index)


def reference_clip(centers, edge, keys):
    """Midline clipping over all box pairs, each detected on the unclipped boxes."""
    half = 0.5 * edge
    orig = [(x - half, y - half, x + half, y + half) for x, y in centers]
    out = [list(b) for b in orig]
    collapsed = set()
    for a in range(len(orig)):
        for b in range(a + 1, len(orig)):
            A, B = orig[a], orig[b]
            iw = min(A[2], B[2]) - max(A[0], B[0])
            ih = min(A[3], B[3]) - max(A[1], B[1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            dx = abs(centers[b][0] - centers[a][0])
            dy = abs(centers[b][1] - centers[a][1])
            if dx == 0.0 and dy == 0.0:
                collapsed.add(b if keys[a] < keys[b] else a)
                continue
            ax = 0 if dx >= dy else 1
            mid = (centers[a][ax] + centers[b][ax]) * 0.5
            lo, hi = (a, b) if centers[a][ax] < centers[b][ax] else (b, a)
            out[lo][ax + 2] = min(out[lo][ax + 2], mid)
            out[hi][ax] = max(out[hi][ax], mid)
    for i in collapsed:
        out[i] = [centers[i][0], centers[i][1], centers[i][0], centers[i][1]]
    return [tuple(b) for b in out], len(collapsed)


def reference_associate(points, priors, policy, cfg, grid):
    """Return ``(sorted list of (point, prior, iou, box), degenerate count)``."""
    enabled = [i for i, p in enumerate(priors) if policy.enabled(p.class_id)]
    kept = [enabled[k] for k in reference_dedup([priors[i] for i in enabled])]
    labels = [priors[i] for i in kept]
    cands = reference_candidates(points, labels, grid.half_range, grid.cells_per_side)
    centers = [(points[i].x, points[i].y) for i, _ in cands]
    keys = [_point_key(points[i], i) for i, _ in cands]
    boxes, n_degenerate = reference_clip(centers, cfg.alpha * cfg.radar_box_edge, keys)
    result = []
    for (i, j), box in zip(cands, boxes):
        score = _iou(box, _footprint(labels[j]))
        if score >= cfg.beta:
            result.append((i, kept[j], score, box))
    result.sort()
    return result, n_degenerate
