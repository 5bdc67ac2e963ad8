"""BEV grid, axis-aligned boxes, IOU and ego-pose transforms.

Conventions
-----------
* The grid is centred on the ego vehicle. Row indexes +x, column indexes +y.
* Cells are half-open: a coordinate exactly on a boundary belongs to the
  higher-index cell.
* A cell "is covered" by a box when its centre lies in the half-open box
  ``[min_x, max_x) x [min_y, max_y)``. Touching boxes therefore never share
  a cell, and a zero-area box covers nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange

DEFAULT_HALF_RANGE = 51.2
DEFAULT_CELLS_PER_SIDE = 256


@dataclass(frozen=True)
class GridSpec:
    half_range: float = DEFAULT_HALF_RANGE
    cells_per_side: int = DEFAULT_CELLS_PER_SIDE

    def __post_init__(self):
        if not (math.isfinite(self.half_range) and self.half_range > 0):
            raise ValueError(f"half_range must be > 0, got {self.half_range!r}")
        if int(self.cells_per_side) != self.cells_per_side or self.cells_per_side <= 0:
            raise ValueError(f"cells_per_side must be a positive integer, got {self.cells_per_side!r}")
        object.__setattr__(self, "half_range", float(self.half_range))
        object.__setattr__(self, "cells_per_side", int(self.cells_per_side))

    @property
    def cell_size(self) -> float:
        return (2.0 * self.half_range) / self.cells_per_side

    def in_range(self, x, y) -> bool:
        return abs(x) < self.half_range and abs(y) < self.half_range

    def cell_center(self, index):
        """Metric coordinate of the centre of cell ``index`` along either axis.

        Works on scalars and numpy arrays. Every containment test in the
        package goes through this one formula so the kernels and the
        brute-force oracles agree bit for bit.
        """
        return -self.half_range + (index + 0.5) * self.cell_size


@dataclass(frozen=True)
class BevBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y):
            raise ValueError(f"invalid box extents: {self}")

    @classmethod
    def from_center(cls, cx, cy, size_x, size_y=None) -> "BevBox":
        if size_y is None:
            size_y = size_x
        hx, hy = 0.5 * size_x, 0.5 * size_y
        return cls(cx - hx, cy - hy, cx + hx, cy + hy)

    @property
    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)

    def contains(self, x, y) -> bool:
        """Closed containment."""
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def as_tuple(self):
        return (self.min_x, self.min_y, self.max_x, self.max_y)


def world_to_cell(x, y, grid: GridSpec):
    """Quantize a planar point to its ``(row, col)`` cell.

    Raises OutOfRange unless both coordinates lie in the open interval
    ``(-half_range, half_range)``.
    """
    if not grid.in_range(x, y):
        raise OutOfRange(f"point ({x}, {y}) outside +/-{grid.half_range} m")
    n = grid.cells_per_side
    cs = grid.cell_size
    row = math.floor((x + grid.half_range) / cs)
    col = math.floor((y + grid.half_range) / cs)
    # guards the x -> half_range rounding edge
    return min(row, n - 1), min(col, n - 1)


def cell_to_world(row, col, grid: GridSpec):
    n = grid.cells_per_side
    if not (0 <= row < n and 0 <= col < n):
        raise OutOfRange(f"cell ({row}, {col}) outside a {n}x{n} grid")
    return grid.cell_center(row), grid.cell_center(col)


def world_to_cell_array(xy: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorized ``world_to_cell`` for an ``(N, 2)`` array; returns int64 ``(N, 2)``."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if xy.size and not np.all(np.abs(xy) < grid.half_range):
        bad = np.flatnonzero(~np.all(np.abs(xy) < grid.half_range, axis=1))[0]
        raise OutOfRange(f"point {tuple(xy[bad])} outside +/-{grid.half_range} m")
    cells = np.floor((xy + grid.half_range) / grid.cell_size).astype(np.int64)
    return np.minimum(cells, grid.cells_per_side - 1)


def iou(a: BevBox, b: BevBox) -> float:
    iw = min(a.max_x, b.max_x) - max(a.min_x, b.min_x)
    ih = min(a.max_y, b.max_y) - max(a.min_y, b.min_y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise IOU of broadcastable ``(..., 4)`` box arrays (min_x, min_y, max_x, max_y)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    hit = (iw > 0.0) & (ih > 0.0)
    inter = np.where(hit, iw * ih, 0.0)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    ok = hit & (union > 0.0)
    return np.where(ok, inter / np.where(ok, union, 1.0), 0.0)


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion given as ``(w, x, y, z)``."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def yaw_quaternion(yaw):
    return (math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw))


@dataclass(frozen=True)
class EgoPose:
    """Global-from-ego rigid transform at ``timestamp`` (microseconds).

    ``rotation`` is a unit quaternion ``(w, x, y, z)``.
    """

    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)
    timestamp: int = 0
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = tuple(float(v) for v in self.translation)
        q = tuple(float(v) for v in self.rotation)
        if len(t) != 3 or len(q) != 4:
            raise ValueError("translation needs 3 components and rotation 4")
        norm = math.sqrt(sum(v * v for v in q))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"rotation quaternion norm {norm!r} is not 1 within 1e-9")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "_matrix", quat_to_matrix(q))

    @classmethod
    def from_yaw(cls, x, y, yaw, timestamp=0, z=0.0) -> "EgoPose":
        return cls((x, y, z), yaw_quaternion(yaw), timestamp)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return self._matrix


def relative_transform(src: EgoPose, dst: EgoPose):
    """``(R, t)`` mapping points in ``src`` ego coordinates to ``dst`` ego coordinates."""
    r_dst_t = dst.rotation_matrix.T
    rot = r_dst_t @ src.rotation_matrix
    trans = r_dst_t @ (np.asarray(src.translation) - np.asarray(dst.translation))
    return rot, trans


def transform_point(p, src: EgoPose, dst: EgoPose) -> np.ndarray:
    rot, trans = relative_transform(src, dst)
    return rot @ np.asarray(p, dtype=np.float64) + trans


def transform_points(points: np.ndarray, src: EgoPose, dst: EgoPose) -> np.ndarray:
    """Vectorized ``transform_point`` over an ``(N, 3)`` array."""
    rot, trans = relative_transform(src, dst)
    return np.asarray(points, dtype=np.float64).reshape(-1, 3) @ rot.T + trans


def relative_yaw(src: EgoPose, dst: EgoPose) -> float:
    rot, _ = relative_transform(src, dst)
    return math.atan2(rot[1, 0], rot[0, 0])


def rotate_planar(v: np.ndarray, angle: float) -> np.ndarray:
    """Rotate ``(N, 2)`` planar vectors by ``angle`` radians (no translation)."""
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(v, dtype=np.float64).reshape(-1, 2)
    return np.stack([c * v[:, 0] - s * v[:, 1], s * v[:, 0] + c * v[:, 1]], axis=1)
