"""Flat ``section.key = value`` experiment files.

Every key has a default equal to the reference settings, so an empty file
is a valid configuration. Unknown keys and out-of-range values raise
:class:`ConfigError` naming the key.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .control import ConfigError, UpdateMode
from .engine import SimParams
from .model import DropPolicy
from .routing import Controlled, Strategy, strategy_from_name


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional(conv: Callable):
    def parse(s: str):
        return None if s.strip().lower() in ("", "none") else conv(s)

    return parse


def _ids(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


# key -> (SimParams field, converter)
PARAM_KEYS: dict[str, tuple[str, Callable]] = {
    "engine.bandwidth": ("bandwidth", float),
    "engine.buffer_bytes": ("buffer_bytes", int),
    "engine.drop_policy": ("drop_policy", DropPolicy),
    "engine.transmission_range_m": ("transmission_range_m", float),
    "data.size_min": ("data_size_min", int),
    "data.size_max": ("data_size_max", int),
    "data.interval_min": ("data_interval_min", float),
    "data.interval_max": ("data_interval_max", float),
    "data.ttl_s": ("data_ttl", _optional(float)),
    "data.generate": ("generate_data", _bool),
    "control.metric_interval": ("metric_interval", float),
    "control.directive_interval": ("directive_interval", float),
    "control.alpha": ("alpha", float),
    "control.k": ("k", float),
    "control.threshold": ("threshold", float),
    "control.rd_default": ("rd_default", float),
    "control.rd_max": ("rd_max", float),
    "control.metric_size": ("metric_size", int),
    "control.directive_size": ("directive_size", int),
    "control.metric_ttl_s": ("metric_ttl", _optional(float)),
    "control.directive_ttl_s": ("directive_ttl", _optional(float)),
    "control.update_mode": ("update_mode", UpdateMode),
    "control.count_control_drops": ("count_control_drops", _bool),
    "control.inject_congestion": ("inject_congestion", _optional(float)),
    "sim.duration": ("duration", _optional(float)),
}
OTHER_KEYS = ("control.controllers", "routing.strategy", "routing.static_limit", "sim.node_count", "sim.seed")
KNOWN_KEYS = tuple(PARAM_KEYS) + OTHER_KEYS


@dataclass(frozen=True)
class RunConfig:
    params: SimParams = field(default_factory=SimParams)
    strategy: Strategy = field(default_factory=Controlled)
    static_limit: int = 10
    controllers: tuple[int, ...] = (0,)
    node_count: Optional[int] = None
    seed: int = 0


def parse_config(text: str) -> RunConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}", key)
        values[key] = value

    def convert(key: str, conv: Callable):
        try:
            return conv(values[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}", key) from None

    overrides = {fname: convert(key, conv) for key, (fname, conv) in PARAM_KEYS.items() if key in values}
    params = replace(SimParams(), **overrides)
    params.validate()

    limit = convert("routing.static_limit", int) if "routing.static_limit" in values else 10
    if limit < 1:
        raise ConfigError("routing.static_limit must be >= 1", "routing.static_limit")
    strategy: Strategy = Controlled()
    if "routing.strategy" in values:
        strategy = convert("routing.strategy", lambda s: strategy_from_name(s, limit))
    controllers = convert("control.controllers", _ids) if "control.controllers" in values else (0,)
    node_count = convert("sim.node_count", int) if "sim.node_count" in values else None
    seed = convert("sim.seed", int) if "sim.seed" in values else 0
    return RunConfig(params, strategy, limit, controllers, node_count, seed)


def default_config_text() -> str:
    """A config file listing every key at its default."""
    p = SimParams()
    lines = []
    for key, (fname, _) in PARAM_KEYS.items():
        v = getattr(p, fname)
        v = "none" if v is None else getattr(v, "value", v)
        if isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{key} = {v}")
    lines += [
        "control.controllers = 0",
        "routing.strategy = controlled",
        "routing.static_limit = 10",
        "sim.seed = 0",
    ]
    return "\n".join(lines) + "\n"
