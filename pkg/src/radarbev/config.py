"""Run configuration: a flat ``key = value`` text file with dotted keys.

Precedence, lowest first: built-in defaults, config file, command-line flags.

Recognised keys::

    grid.half_range        grid.cells_per_side
    match.alpha            match.beta            match.radar_box_edge
    policy.<class>         (true / false)
    sweeps
    input.radar            (comma-separated, current sweep first)
    input.priors           input.poses
    output.path
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .association import MatchConfig
from .errors import ConfigError
from .geometry import GridSpec
from .priors import CLASSES, ClassPolicy

_FLOAT_KEYS = {"grid.half_range", "match.alpha", "match.beta", "match.radar_box_edge"}
_INT_KEYS = {"grid.cells_per_side", "sweeps"}
_PATH_KEYS = {"input.priors", "input.poses", "output.path"}
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = GridSpec()
    match: MatchConfig = MatchConfig()
    policy: ClassPolicy = field(default_factory=ClassPolicy)
    sweeps: int = 3
    radar: tuple = ()
    priors: str = None
    poses: str = None
    out: str = None

    def __post_init__(self):
        if self.sweeps not in (1, 2, 3):
            raise ConfigError(f"sweeps must be 1, 2 or 3, got {self.sweeps!r}")
        object.__setattr__(self, "radar", tuple(self.radar))

    def to_text(self) -> str:
        lines = [
            f"grid.half_range = {self.grid.half_range!r}",
            f"grid.cells_per_side = {self.grid.cells_per_side}",
            f"match.alpha = {self.match.alpha!r}",
            f"match.beta = {self.match.beta!r}",
            f"match.radar_box_edge = {self.match.radar_box_edge!r}",
            f"sweeps = {self.sweeps}",
        ]
        lines += [f"policy.{c} = {str(v).lower()}" for c, v in self.policy.fusion_enabled.items()]
        if self.radar:
            lines.append("input.radar = " + ",".join(self.radar))
        for key, value in (("input.priors", self.priors), ("input.poses", self.poses),
                           ("output.path", self.out)):
            if value is not None:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse config text into ``{dotted key: raw string}``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not _known(key):
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _known(key):
    if key in _FLOAT_KEYS or key in _INT_KEYS or key in _PATH_KEYS or key == "input.radar":
        return True
    return key.startswith("policy.") and key[len("policy."):] in CLASSES


def _convert(key, value):
    if isinstance(value, str):
        value = value.strip()
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    if key.startswith("policy."):
        if isinstance(value, bool):
            return value
        low = str(value).lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    if key == "input.radar":
        if isinstance(value, str):
            return tuple(p.strip() for p in value.split(",") if p.strip())
        return tuple(value)
    return value


def build_config(values: dict, base: RunConfig = None) -> RunConfig:
    """Apply ``{dotted key: value}`` on top of ``base`` and re-validate everything."""
    cfg = base or RunConfig()
    v = {k: _convert(k, val) for k, val in values.items() if val is not None}
    try:
        grid = GridSpec(v.get("grid.half_range", cfg.grid.half_range),
                        v.get("grid.cells_per_side", cfg.grid.cells_per_side))
        match = MatchConfig(v.get("match.alpha", cfg.match.alpha),
                            v.get("match.beta", cfg.match.beta),
                            v.get("match.radar_box_edge", cfg.match.radar_box_edge))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    overrides = {k[len("policy."):]: val for k, val in v.items() if k.startswith("policy.")}
    return replace(
        cfg,
        grid=grid,
        match=match,
        policy=cfg.policy.with_overrides(overrides),
        sweeps=v.get("sweeps", cfg.sweeps),
        radar=v.get("input.radar", cfg.radar),
        priors=v.get("input.priors", cfg.priors),
        poses=v.get("input.poses", cfg.poses),
        out=v.get("output.path", cfg.out),
    )


def load_config(path=None, overrides: dict = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    values.update({k: val for k, val in (overrides or {}).items() if val is not None})
    return build_config(values)
