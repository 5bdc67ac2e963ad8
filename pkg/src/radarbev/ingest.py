"""Radar sweep and ego-pose ingestion, depth gating and multi-sweep accumulation.

Sweep JSONL: one object per line with keys ``x y z vx vy vx_comp vy_comp rcs t``
(numbers; ``t`` an integer timestamp in microseconds). Points are already in
the ego frame of their own sweep.

Pose JSONL: keys ``frame_id tx ty tz qw qx qy qz t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ParseError, PoseOrderError, VelocityOutOfRange
from .geometry import EgoPose, GridSpec, relative_yaw, rotate_planar, transform_points

MAX_SPEED = 150.0
SWEEP_KEYS = ("x", "y", "z", "vx", "vy", "vx_comp", "vy_comp", "rcs", "t")
POSE_KEYS = ("frame_id", "tx", "ty", "tz", "qw", "qx", "qy", "qz", "t")


@dataclass(frozen=True)
class RadarPoint:
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vx_comp: float
    vy_comp: float
    rcs: float
    timestamp: int
    sweep_offset: int = 0
    # line index in the originating sweep file, -1 when synthesized in memory
    source_index: int = -1

    def __post_init__(self):
        if self.sweep_offset not in (0, 1, 2):
            raise ValueError(f"sweep_offset must be 0, 1 or 2, got {self.sweep_offset!r}")

    @property
    def position(self):
        return (self.x, self.y, self.z)

    @property
    def v_raw(self):
        return (self.vx, self.vy)

    @property
    def v_comp(self):
        return (self.vx_comp, self.vy_comp)


@dataclass(frozen=True)
class SweepBundle:
    """Radar points of the current and preceding sweeps, all in the current ego frame."""

    points: tuple
    frame_id: str = ""
    ego_pose: EgoPose = EgoPose()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.points], dtype=np.float64).reshape(-1, 2)

    @cached_property
    def v_comp(self) -> np.ndarray:
        return np.array([(p.vx_comp, p.vy_comp) for p in self.points], dtype=np.float64).reshape(-1, 2)

    @cached_property
    def sweep_offsets(self) -> np.ndarray:
        return np.array([p.sweep_offset for p in self.points], dtype=np.int64)


def _lines(data):
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        return data.split("\n")
    return list(data)


def _reject_constant(name):
    raise ValueError(f"non-finite literal {name}")


def _record(line, lineno, source, keys):
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError(f"invalid JSON ({exc})", lineno, source) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", lineno, source)
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ParseError(f"missing keys {missing}", lineno, source)
    return obj


def _number(obj, key, lineno, source):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{key!r} must be a number, got {value!r}", lineno, source)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(f"{key!r} is not finite", lineno, source)
    return value


def _integer(obj, key, lineno, source):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ParseError(f"{key!r} must be an integer, got {value!r}", lineno, source)
    return value


def parse_sweep(data, source: Optional[str] = None) -> list:
    """Parse a radar sweep JSONL payload into RadarPoints.

    Blank lines are skipped. ``source_index`` records the 0-based index of the
    record among non-blank lines; error line numbers are 1-based file lines.
    """
    points = []
    for lineno, line in enumerate(_lines(data), start=1):
        if not line.strip():
            continue
        obj = _record(line, lineno, source, SWEEP_KEYS)
        vals = {k: _number(obj, k, lineno, source) for k in SWEEP_KEYS if k != "t"}
        t = _integer(obj, "t", lineno, source)
        for a, b in (("vx", "vy"), ("vx_comp", "vy_comp")):
            speed = math.hypot(vals[a], vals[b])
            if speed >= MAX_SPEED:
                raise VelocityOutOfRange(
                    f"|({a}, {b})| = {speed:.3f} m/s exceeds {MAX_SPEED} m/s", lineno, source
                )
        points.append(RadarPoint(**vals, timestamp=t, source_index=len(points)))
    return points


def serialize_sweep(points: Iterable[RadarPoint]) -> str:
    """Inverse of :func:`parse_sweep`. Float repr keeps the round trip bit-exact."""
    out = []
    for p in points:
        rec = {
            "x": p.x, "y": p.y, "z": p.z, "vx": p.vx, "vy": p.vy,
            "vx_comp": p.vx_comp, "vy_comp": p.vy_comp, "rcs": p.rcs, "t": int(p.timestamp),
        }
        out.append(json.dumps(rec) + "\n")
    return "".join(out)


def parse_poses(data, source: Optional[str] = None) -> list:
    """Parse pose JSONL into a list of ``(frame_id, EgoPose)``."""
    poses = []
    for lineno, line in enumerate(_lines(data), start=1):
        if not line.strip():
            continue
        obj = _record(line, lineno, source, POSE_KEYS)
        if not isinstance(obj["frame_id"], str):
            raise ParseError("'frame_id' must be a string", lineno, source)
        t = tuple(_number(obj, k, lineno, source) for k in ("tx", "ty", "tz"))
        q = tuple(_number(obj, k, lineno, source) for k in ("qw", "qx", "qy", "qz"))
        try:
            pose = EgoPose(t, q, _integer(obj, "t", lineno, source))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        poses.append((obj["frame_id"], pose))
    return poses


def serialize_poses(poses: Iterable) -> str:
    out = []
    for frame_id, pose in poses:
        tx, ty, tz = pose.translation
        qw, qx, qy, qz = pose.rotation
        rec = {"frame_id": frame_id, "tx": tx, "ty": ty, "tz": tz,
               "qw": qw, "qx": qx, "qy": qy, "qz": qz, "t": pose.timestamp}
        out.append(json.dumps(rec) + "\n")
    return "".join(out)


def gate_by_depth(points: Sequence[RadarPoint], grid: GridSpec) -> list:
    hr = grid.half_range
    return [p for p in points if abs(p.x) < hr and abs(p.y) < hr]


def _move_sweep(points, src: EgoPose, dst: EgoPose, offset: int) -> list:
    if not points:
        return []
    if src.translation == dst.translation and src.rotation == dst.rotation:
        return [replace(p, sweep_offset=offset) for p in points]
    xyz = np.array([p.position for p in points], dtype=np.float64)
    vel = np.array([p.v_comp for p in points], dtype=np.float64)
    vraw = np.array([p.v_raw for p in points], dtype=np.float64)
    new_xyz = transform_points(xyz, src, dst)
    yaw = relative_yaw(src, dst)
    new_vel = rotate_planar(vel, yaw)
    new_raw = rotate_planar(vraw, yaw)
    return [
        replace(
            p,
            x=float(new_xyz[i, 0]), y=float(new_xyz[i, 1]), z=float(new_xyz[i, 2]),
            vx=float(new_raw[i, 0]), vy=float(new_raw[i, 1]),
            vx_comp=float(new_vel[i, 0]), vy_comp=float(new_vel[i, 1]),
            sweep_offset=offset,
        )
        for i, p in enumerate(points)
    ]


def accumulate_sweeps(
    current,
    prev1=None,
    prev2=None,
    grid: GridSpec = GridSpec(),
    frame_id: str = "",
) -> SweepBundle:
    """Merge the current sweep with up to two preceding sweeps.

    Each argument is ``(points, pose)`` or None for an absent previous sweep.
    The current pose may be None when no previous sweep is supplied. Previous
    points are moved rigidly into the current ego frame; their velocities are
    rotated by the heading change only. Gating happens after the move.
    """
    cur_points, cur_pose = current
    present = [(0, cur_points, cur_pose)]
    for offset, sweep in ((1, prev1), (2, prev2)):
        if sweep is not None:
            present.append((offset, sweep[0], sweep[1]))
    if len(present) > 1:
        if any(pose is None for _, _, pose in present):
            raise PoseOrderError("every sweep needs a pose when previous sweeps are supplied")
        stamps = [pose.timestamp for _, _, pose in reversed(present)]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise PoseOrderError(f"pose timestamps not strictly increasing: {stamps}")
    if cur_pose is None:
        cur_pose = EgoPose()

    merged = [replace(p, sweep_offset=0) for p in cur_points]
    for offset, points, pose in present[1:]:
        merged.extend(_move_sweep(list(points), pose, cur_pose, offset))
    return SweepBundle(tuple(gate_by_depth(merged, grid)), frame_id, cur_pose)
