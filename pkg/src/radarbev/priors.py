"""Camera-derived object priors: loading, per-class radar policy, and dedup.

Priors JSONL: keys ``class cx cy w l yaw score`` and optional ``vx vy``.
``l`` runs along the heading ``yaw``, ``w`` across it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ParseError, UnknownClass
from .geometry import BevBox, iou_arrays

CLASSES = (
    "car",
    "truck",
    "bus",
    "trailer",
    "construction_vehicle",
    "pedestrian",
    "motorcycle",
    "bicycle",
    "traffic_cone",
    "barrier",
)
# radar returns on these are too unreliable to fuse
DEFAULT_EXCLUDED = ("pedestrian", "traffic_cone")

PRIOR_KEYS = ("class", "cx", "cy", "w", "l", "yaw", "score")


@dataclass(frozen=True)
class PriorBox:
    class_id: str
    cx: float
    cy: float
    width: float
    length: float
    yaw: float = 0.0
    score: float = 1.0
    velocity_prior: Optional[tuple] = None

    def __post_init__(self):
        if self.class_id not in CLASSES:
            raise UnknownClass(f"unknown class {self.class_id!r}")
        if not (self.width > 0 and self.length > 0):
            raise ValueError(f"prior size must be positive, got w={self.width} l={self.length}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"prior score must lie in [0, 1], got {self.score}")

    @property
    def center(self):
        return (self.cx, self.cy)

    def footprint(self) -> BevBox:
        """Smallest axis-aligned box enclosing the yawed footprint."""
        c, s = abs(math.cos(self.yaw)), abs(math.sin(self.yaw))
        hx = 0.5 * (c * self.length + s * self.width)
        hy = 0.5 * (s * self.length + c * self.width)
        return BevBox(self.cx - hx, self.cy - hy, self.cx + hx, self.cy + hy)


@dataclass(frozen=True)
class ClassPolicy:
    fusion_enabled: Mapping = field(
        default_factory=lambda: {c: c not in DEFAULT_EXCLUDED for c in CLASSES}
    )

    def __post_init__(self):
        table = dict(self.fusion_enabled)
        unknown = set(table) - set(CLASSES)
        if unknown:
            raise UnknownClass(f"unknown classes in policy: {sorted(unknown)}")
        full = {c: bool(table.get(c, True)) for c in CLASSES}
        object.__setattr__(self, "fusion_enabled", MappingProxyType(full))

    @classmethod
    def all_enabled(cls):
        return cls({c: True for c in CLASSES})

    @classmethod
    def all_disabled(cls):
        return cls({c: False for c in CLASSES})

    def with_overrides(self, overrides: Mapping) -> "ClassPolicy":
        return ClassPolicy({**self.fusion_enabled, **overrides})

    def enabled(self, class_id) -> bool:
        return self.fusion_enabled[class_id]

    @property
    def excluded(self):
        return tuple(c for c in CLASSES if not self.fusion_enabled[c])


def _field(obj, key, lineno, source, optional=False):
    if key not in obj:
        if optional:
            return None
        raise ParseError(f"missing key {key!r}", lineno, source)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParseError(f"{key!r} must be a finite number, got {value!r}", lineno, source)
    return float(value)


def load_priors(data, source: Optional[str] = None) -> list:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    lines = data.split("\n") if isinstance(data, str) else list(data)
    priors = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_constant=lambda name: float("nan"))
        except ValueError as exc:
            raise ParseError(f"invalid JSON ({exc})", lineno, source) from None
        if not isinstance(obj, dict):
            raise ParseError("record is not a JSON object", lineno, source)
        if "class" not in obj:
            raise ParseError("missing key 'class'", lineno, source)
        cls = obj["class"]
        if cls not in CLASSES:
            raise UnknownClass(f"unknown class {cls!r}", lineno, source)
        nums = {k: _field(obj, k, lineno, source) for k in PRIOR_KEYS[1:]}
        vx = _field(obj, "vx", lineno, source, optional=True)
        vy = _field(obj, "vy", lineno, source, optional=True)
        if (vx is None) != (vy is None):
            raise ParseError("'vx' and 'vy' must be given together", lineno, source)
        try:
            prior = PriorBox(
                cls, nums["cx"], nums["cy"], nums["w"], nums["l"], nums["yaw"], nums["score"],
                None if vx is None else (vx, vy),
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        priors.append(prior)
    return priors


def serialize_priors(priors: Iterable[PriorBox]) -> str:
    out = []
    for p in priors:
        rec = {"class": p.class_id, "cx": p.cx, "cy": p.cy, "w": p.width, "l": p.length,
               "yaw": p.yaw, "score": p.score}
        if p.velocity_prior is not None:
            rec["vx"], rec["vy"] = p.velocity_prior
        out.append(json.dumps(rec) + "\n")
    return "".join(out)


def apply_class_policy(priors: Sequence[PriorBox], policy: ClassPolicy = ClassPolicy()) -> list:
    return [p for p in priors if policy.enabled(p.class_id)]


def footprint_array(priors: Sequence[PriorBox]) -> np.ndarray:
    return np.array([p.footprint().as_tuple() for p in priors], dtype=np.float64).reshape(-1, 4)


def dedup_indices(priors: Sequence[PriorBox]) -> list:
    """Indices kept by :func:`dedup_priors`, in descending-score order."""
    if not priors:
        return []
    boxes = footprint_array(priors)
    scores = np.array([p.score for p in priors])
    # stable sort: equal scores keep input order
    order = np.argsort(-scores, kind="stable")
    kept = []
    for i in order:
        if kept and np.any(iou_arrays(boxes[kept], boxes[i]) != 0.0):
            continue
        kept.append(int(i))
    return kept


def dedup_priors(priors: Sequence[PriorBox]) -> list:
    """Greedy score-ordered selection of pairwise non-overlapping priors.

    A prior survives only if its footprint has IOU exactly 0 with every
    footprint already kept. Touching footprints count as non-overlapping.
    """
    return [priors[i] for i in dedup_indices(priors)]
