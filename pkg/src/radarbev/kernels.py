"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``paint_labels``, ``lookup_cells``, ``clip_overlaps``,
``rasterize_boxes``) dispatch on :data:`radarbev._accel.USE_NUMBA`. The
``*_nb`` / ``*_np`` variants stay importable so tests can check they agree
exactly and the benchmark can time both.

Boxes are ``(N, 4)`` float64 arrays ordered ``min_x, min_y, max_x, max_y``.
A cell ``i`` has centre ``-half_range + (i + 0.5) * cell_size``; a box covers
the cells whose centres lie in its half-open extent.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------- cell spans


@njit(cache=True)
def _first_center_at_least_nb(v, half_range, cell_size, n):
    i = math.ceil((v + half_range) / cell_size - 0.5)
    if -half_range + (i - 1 + 0.5) * cell_size >= v:
        i -= 1
    if -half_range + (i + 0.5) * cell_size < v:
        i += 1
    if i < 0:
        return 0
    if i > n:
        return n
    return i


def _first_center_at_least_np(v, half_range, cell_size, n):
    i = np.ceil((np.asarray(v, dtype=np.float64) + half_range) / cell_size - 0.5).astype(np.int64)
    i = np.where(-half_range + (i - 1 + 0.5) * cell_size >= v, i - 1, i)
    i = np.where(-half_range + (i + 0.5) * cell_size < v, i + 1, i)
    return np.clip(i, 0, n)


def cell_spans(boxes, half_range, cell_size, n):
    """Half-open ``(row0, row1, col0, col1)`` index ranges covered by each box."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    f = _first_center_at_least_np
    return (
        f(boxes[:, 0], half_range, cell_size, n),
        f(boxes[:, 2], half_range, cell_size, n),
        f(boxes[:, 1], half_range, cell_size, n),
        f(boxes[:, 3], half_range, cell_size, n),
    )


# ---------------------------------------------------------- label painting


@njit(cache=True)
def paint_labels_nb(boxes, half_range, cell_size, n):
    grid = np.full((n, n), -1, dtype=np.int32)
    for k in range(boxes.shape[0]):
        r0 = _first_center_at_least_nb(boxes[k, 0], half_range, cell_size, n)
        r1 = _first_center_at_least_nb(boxes[k, 2], half_range, cell_size, n)
        c0 = _first_center_at_least_nb(boxes[k, 1], half_range, cell_size, n)
        c1 = _first_center_at_least_nb(boxes[k, 3], half_range, cell_size, n)
        for r in range(r0, r1):
            for c in range(c0, c1):
                if grid[r, c] < 0:
                    grid[r, c] = k
    return grid


def paint_labels_np(boxes, half_range, cell_size, n):
    grid = np.full((n, n), -1, dtype=np.int32)
    r0, r1, c0, c1 = cell_spans(boxes, half_range, cell_size, n)
    # reverse order so the lowest label index wins a contested cell
    for k in range(len(r0) - 1, -1, -1):
        grid[r0[k]:r1[k], c0[k]:c1[k]] = k
    return grid


@njit(cache=True)
def lookup_cells_nb(grid, xy, half_range, cell_size):
    n = grid.shape[0]
    out = np.empty(xy.shape[0], dtype=np.int32)
    for i in range(xy.shape[0]):
        r = min(int(math.floor((xy[i, 0] + half_range) / cell_size)), n - 1)
        c = min(int(math.floor((xy[i, 1] + half_range) / cell_size)), n - 1)
        out[i] = grid[r, c]
    return out


def lookup_cells_np(grid, xy, half_range, cell_size):
    n = grid.shape[0]
    cells = np.minimum(np.floor((xy + half_range) / cell_size).astype(np.int64), n - 1)
    return grid[cells[:, 0], cells[:, 1]].astype(np.int32)


# -------------------------------------------------------- midline clipping


@njit(cache=True)
def clip_overlaps_nb(boxes, centers, rank):
    n = boxes.shape[0]
    out = boxes.copy()
    degenerate = np.zeros(n, dtype=np.bool_)
    order = np.argsort(boxes[:, 0], kind="mergesort")
    for ia in range(n):
        a = order[ia]
        for ib in range(ia + 1, n):
            b = order[ib]
            if boxes[b, 0] >= boxes[a, 2]:
                break
            iw = min(boxes[a, 2], boxes[b, 2]) - max(boxes[a, 0], boxes[b, 0])
            ih = min(boxes[a, 3], boxes[b, 3]) - max(boxes[a, 1], boxes[b, 1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            dx = abs(centers[b, 0] - centers[a, 0])
            dy = abs(centers[b, 1] - centers[a, 1])
            if dx == 0.0 and dy == 0.0:
                if rank[a] < rank[b]:
                    degenerate[b] = True
                else:
                    degenerate[a] = True
                continue
            axis = 0 if dx >= dy else 1
            mid = (centers[a, axis] + centers[b, axis]) * 0.5
            if centers[a, axis] < centers[b, axis]:
                lo, hi = a, b
            else:
                lo, hi = b, a
            if mid < out[lo, axis + 2]:
                out[lo, axis + 2] = mid
            if mid > out[hi, axis]:
                out[hi, axis] = mid
    count = 0
    for i in range(n):
        if degenerate[i]:
            out[i, 0] = centers[i, 0]
            out[i, 2] = centers[i, 0]
            out[i, 1] = centers[i, 1]
            out[i, 3] = centers[i, 1]
            count += 1
    return out, count


def _candidate_pairs_np(boxes):
    """All ``(a, b)`` whose boxes overlap with positive area (sweep and prune on x)."""
    n = boxes.shape[0]
    order = np.argsort(boxes[:, 0], kind="mergesort")
    sorted_min = boxes[order, 0]
    hi = np.searchsorted(sorted_min, boxes[order, 2], side="left")
    counts = np.maximum(hi - np.arange(1, n + 1), 0)
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    first = np.repeat(np.arange(n), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    second = first + 1 + (np.arange(total) - starts)
    a, b = order[first], order[second]
    iw = np.minimum(boxes[a, 2], boxes[b, 2]) - np.maximum(boxes[a, 0], boxes[b, 0])
    ih = np.minimum(boxes[a, 3], boxes[b, 3]) - np.maximum(boxes[a, 1], boxes[b, 1])
    keep = (iw > 0.0) & (ih > 0.0)
    return a[keep], b[keep]


def clip_overlaps_np(boxes, centers, rank):
    boxes = np.asarray(boxes, dtype=np.float64)
    n = boxes.shape[0]
    out = boxes.copy()
    if n == 0:
        return out, 0
    a, b = _candidate_pairs_np(boxes)
    dx = np.abs(centers[b, 0] - centers[a, 0])
    dy = np.abs(centers[b, 1] - centers[a, 1])
    same = (dx == 0.0) & (dy == 0.0)

    degenerate = np.zeros(n, dtype=bool)
    loser = np.where(rank[a[same]] < rank[b[same]], b[same], a[same])
    degenerate[loser] = True

    a, b, dx, dy = a[~same], b[~same], dx[~same], dy[~same]
    axis = np.where(dx >= dy, 0, 1)
    ca = centers[a, axis]
    cb = centers[b, axis]
    mid = (ca + cb) * 0.5
    lo = np.where(ca < cb, a, b)
    hi = np.where(ca < cb, b, a)
    flat = out.reshape(-1)
    np.minimum.at(flat, lo * 4 + axis + 2, mid)
    np.maximum.at(flat, hi * 4 + axis, mid)

    idx = np.flatnonzero(degenerate)
    out[idx, 0] = out[idx, 2] = centers[idx, 0]
    out[idx, 1] = out[idx, 3] = centers[idx, 1]
    return out, int(idx.size)


# ------------------------------------------------------------ rasterization


@njit(cache=True)
def rasterize_boxes_nb(boxes, values, order, half_range, cell_size, n):
    nch = values.shape[1]
    out = np.zeros((nch + 1, n, n), dtype=np.float32)
    for k in range(order.shape[0]):
        j = order[k]
        r0 = _first_center_at_least_nb(boxes[j, 0], half_range, cell_size, n)
        r1 = _first_center_at_least_nb(boxes[j, 2], half_range, cell_size, n)
        c0 = _first_center_at_least_nb(boxes[j, 1], half_range, cell_size, n)
        c1 = _first_center_at_least_nb(boxes[j, 3], half_range, cell_size, n)
        for r in range(r0, r1):
            for c in range(c0, c1):
                for ch in range(nch):
                    out[ch, r, c] = values[j, ch]
                out[nch, r, c] = 1.0
    return out


def rasterize_boxes_np(boxes, values, order, half_range, cell_size, n):
    """Write ``values`` (plus a trailing occupancy plane) over each box, in ``order``.

    Later writes win a contested cell.
    """
    values = np.asarray(values, dtype=np.float64)
    nch = values.shape[1]
    out = np.zeros((nch + 1, n, n), dtype=np.float32)
    r0, r1, c0, c1 = cell_spans(boxes, half_range, cell_size, n)
    fill = np.empty((len(values), nch + 1), dtype=np.float32)
    fill[:, :nch] = values
    fill[:, nch] = 1.0
    for j in order:
        if r0[j] < r1[j] and c0[j] < c1[j]:
            out[:, r0[j]:r1[j], c0[j]:c1[j]] = fill[j, :, None, None]
    return out


if USE_NUMBA:
    paint_labels = paint_labels_nb
    lookup_cells = lookup_cells_nb
    clip_overlaps = clip_overlaps_nb
    rasterize_boxes = rasterize_boxes_nb
else:
    paint_labels = paint_labels_np
    lookup_cells = lookup_cells_np
    clip_overlaps = clip_overlaps_np
    rasterize_boxes = rasterize_boxes_np
