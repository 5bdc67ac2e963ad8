"""Radar BEV feature map: rasterization, fusion layout and binary file format.

File layout (little-endian)::

    b"BEVR" | version u16 | cells_per_side u32 | half_range f64 | channel_count u16
    channel_count x (name_length u16 | utf-8 name)
    channel_count x cells_per_side x cells_per_side f32, channel-major, row-major
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .association import Association
from .errors import FormatError, GridMismatch, TruncatedFile
from .geometry import GridSpec
from .ingest import SweepBundle

MAGIC = b"BEVR"
VERSION = 1
CHANNELS = ("x", "y", "vx_comp", "vy_comp", "occupancy")
_HEADER = struct.Struct("<4sHIdH")


@dataclass(frozen=True, eq=False)
class RadarFeatureMap:
    grid: GridSpec
    data: np.ndarray  # (channels, cells, cells) float32
    channel_names: tuple = CHANNELS

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        n = self.grid.cells_per_side
        if data.shape != (len(self.channel_names), n, n):
            raise ValueError(f"data shape {data.shape} does not match grid and channel names")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    def __eq__(self, other):
        if not isinstance(other, RadarFeatureMap):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.channel_names == other.channel_names
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None

    def channel(self, name) -> np.ndarray:
        return self.data[self.channel_names.index(name)]

    @property
    def occupancy(self) -> np.ndarray:
        return self.channel("occupancy")

    @classmethod
    def zeros(cls, grid: GridSpec = GridSpec()):
        n = grid.cells_per_side
        return cls(grid, np.zeros((len(CHANNELS), n, n), dtype=np.float32))


def rasterize(assoc: Association, points: SweepBundle, grid: GridSpec = GridSpec()) -> RadarFeatureMap:
    """Paint each matched point's position and compensated velocity over its clipped box.

    Cells are covered when their centre lies inside the half-open box. Should
    two matched boxes claim a cell, the pair with the higher IOU wins, then
    the more recent sweep.
    """
    if assoc.grid != grid:
        raise GridMismatch(f"association grid {assoc.grid} differs from target grid {grid}")
    if assoc.n_points != len(points):
        raise ValueError(f"association covers {assoc.n_points} points, bundle has {len(points)}")
    if not assoc.pairs:
        return RadarFeatureMap.zeros(grid)
    idx = np.array([p.point for p in assoc.pairs], dtype=np.int64)
    boxes = np.array([p.box.as_tuple() for p in assoc.pairs], dtype=np.float64)
    scores = np.array([p.iou for p in assoc.pairs], dtype=np.float64)
    xy = points.xy[idx]
    values = np.concatenate([xy, points.v_comp[idx]], axis=1)
    # last write wins: ascending iou, then older sweeps first
    order = np.lexsort((xy[:, 1], xy[:, 0], -points.sweep_offsets[idx], scores)).astype(np.int64)
    data = kernels.rasterize_boxes(boxes, values, order, grid.half_range, grid.cell_size, grid.cells_per_side)
    return RadarFeatureMap(grid, data)


@dataclass(frozen=True)
class FusedFeatureDescriptor:
    """Channel layout of camera BEV features with the radar planes appended."""

    camera_channels: int
    radar_channels: int
    grid: GridSpec
    radar_channel_names: tuple = CHANNELS

    @property
    def total_channels(self) -> int:
        return self.camera_channels + self.radar_channels

    @property
    def radar_slice(self) -> slice:
        return slice(self.camera_channels, self.total_channels)

    @property
    def shape(self):
        n = self.grid.cells_per_side
        return (self.total_channels, n, n)


def concat_descriptor(camera_channels: int, radar: RadarFeatureMap, camera_grid: GridSpec = None):
    if camera_channels <= 0:
        raise ValueError(f"camera_channels must be positive, got {camera_channels}")
    if camera_grid is not None and camera_grid != radar.grid:
        raise GridMismatch(f"camera grid {camera_grid} differs from radar grid {radar.grid}")
    return FusedFeatureDescriptor(
        int(camera_channels), len(radar.channel_names), radar.grid, radar.channel_names
    )


def feature_map_to_bytes(fmap: RadarFeatureMap) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, fmap.grid.cells_per_side, fmap.grid.half_range,
                           len(fmap.channel_names)))
    for name in fmap.channel_names:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
    buf.write(fmap.data.astype("<f4", copy=False).tobytes(order="C"))
    return buf.getvalue()


def _take(view, offset, size, what):
    if offset + size > len(view):
        raise TruncatedFile(f"file ends inside the {what} (need {offset + size} bytes, have {len(view)})")
    return bytes(view[offset:offset + size]), offset + size


def feature_map_from_bytes(blob) -> RadarFeatureMap:
    view = memoryview(blob)
    if len(view) >= 4 and bytes(view[:4]) != MAGIC:
        raise FormatError(f"bad magic {bytes(view[:4])!r}, expected {MAGIC!r}")
    head, off = _take(view, 0, _HEADER.size, "header")
    magic, version, cells, half_range, nch = _HEADER.unpack(head)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    names = []
    for _ in range(nch):
        raw, off = _take(view, off, 2, "channel-name table")
        (length,) = struct.unpack("<H", raw)
        raw, off = _take(view, off, length, "channel-name table")
        names.append(raw.decode("utf-8"))
    payload, off = _take(view, off, 4 * nch * cells * cells, "channel planes")
    if off != len(view):
        raise FormatError(f"{len(view) - off} trailing bytes after the channel planes")
    try:
        grid = GridSpec(half_range, cells)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    data = np.frombuffer(payload, dtype="<f4").reshape(nch, cells, cells)
    return RadarFeatureMap(grid, data.astype(np.float32), tuple(names))


def write_feature_map(fmap: RadarFeatureMap, sink) -> None:
    """Write to a path or a binary file object."""
    blob = feature_map_to_bytes(fmap)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(blob)
    else:
        sink.write(blob)


def read_feature_map(source) -> RadarFeatureMap:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return feature_map_from_bytes(fh.read())
    return feature_map_from_bytes(source.read())
