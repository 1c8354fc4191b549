from __future__ import annotations

from typing import Any, Dict

from torsim.core.errors import ConfigError, UnsupportedConfigError

POLICIES = {"abr", "por", "ofr"}
PATTERNS = {"uniform", "butterfly", "transpose", "transpose3d", "bitrev"}


def validate_config(config: Dict[str, Any]) -> Dict[str, Any]:
    _require_dims(config, ("network", "dims"))
    if _value(config, ("network", "pattern_shape_override")) is not None:
        _require_dims(config, ("network", "pattern_shape_override"))
    _require_int(config, ("router", "capacity"), minimum=2)
    _require_bool(config, ("router", "abr_two_vcs"))

    _require_int(config, ("links", "packet_size_bytes"), minimum=1)
    _require_int(config, ("links", "lat_int_ns"), minimum=0)
    _require_int(config, ("links", "lat_ext_ns"), minimum=0)
    _require_number(config, ("links", "bw_int_gbps"), positive=True)
    _require_number(config, ("links", "bw_ext_gbps"), positive=True)
    _require_number(config, ("links", "injection_rate_factor"), positive=True)

    _require_str(config, ("traffic", "pattern"), choices=PATTERNS)
    _require_number(config, ("traffic", "gamma"))
    _require_int(config, ("traffic", "message_size"), minimum=1)
    _require_number(config, ("traffic", "jitter"))
    if not 0 <= _value(config, ("traffic", "jitter")) < 1:
        raise ConfigError("Config key traffic.jitter must be in [0, 1)")

    _require_str(config, ("routing", "policy"), choices=POLICIES)
    _require_int(config, ("routing", "delta"), minimum=1)
    if _value(config, ("routing", "eta")) is not None:
        _require_number(config, ("routing", "eta"))
    _require_bool(config, ("routing", "ofr_include_widns"))
    _require_str(config, ("routing", "oidn_cover"), choices={"reduced", "full"})

    _require_int(config, ("run", "seed"))
    if _value(config, ("run", "warmup_ns")) is not None:
        _require_int(config, ("run", "warmup_ns"))
    _require_int(config, ("run", "warmup_cap_ns"))
    _require_int(config, ("run", "measure_ns"), minimum=1)
    _require_int(config, ("run", "subwindows"), minimum=4)
    _require_int(config, ("run", "max_events"), minimum=1)
    _require_bool(config, ("run", "audit"))
    _require_bool(config, ("run", "trace_digest"))
    _require_int(config, ("run", "watchdog_factor"), minimum=1)

    _require_gammas(config, ("sweep", "gammas"))
    _require_list(config, ("sweep", "seeds"), item=int)
    _require_list(config, ("sweep", "policies"), item=str, choices=POLICIES)
    _require_list(config, ("sweep", "patterns"), item=str, choices=PATTERNS)
    _require_int(config, ("sweep", "workers"), minimum=1)

    _require_number(config, ("saturation", "lifetime_ratio"), positive=True)
    _require_number(config, ("saturation", "backlog_growth_packets"), positive=True)
    _require_int(config, ("saturation", "min_packets"), minimum=1)
    _require_bool(config, ("saturation", "extend_on_inconclusive"))

    for key in ("csv", "packets"):
        if _value(config, ("output", key)) is not None:
            _require_str(config, ("output", key))

    _require_str(config, ("observability", "log_format"), choices={"json", "plain"})
    _require_str(config, ("observability", "log_level"))

    _require_supported_ofr(config)
    return config


def _value(config: Dict[str, Any], path: tuple[str, ...]) -> Any:
    node: Any = config
    for key in path:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"Missing config key: {'.'.join(path)}")
        node = node[key]
    return node


def _require_bool(config: Dict[str, Any], path: tuple[str, ...]) -> None:
    value = _value(config, path)
    if not isinstance(value, bool):
        raise ConfigError(f"Config key {'.'.join(path)} must be a boolean")


def _require_str(
    config: Dict[str, Any],
    path: tuple[str, ...],
    *,
    choices: set[str] | None = None,
) -> None:
    value = _value(config, path)
    if not isinstance(value, str) or not value:
        raise ConfigError(f"Config key {'.'.join(path)} must be a non-empty string")
    if choices is not None and value not in choices:
        allowed = ", ".join(sorted(choices))
        raise ConfigError(f"Config key {'.'.join(path)} must be one of: {allowed}")


def _require_int(config: Dict[str, Any], path: tuple[str, ...], *, minimum: int = 0) -> None:
    value = _value(config, path)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"Config key {'.'.join(path)} must be an integer")
    if value < minimum:
        raise ConfigError(f"Config key {'.'.join(path)} must be >= {minimum}")


def _require_number(
    config: Dict[str, Any], path: tuple[str, ...], *, positive: bool = False
) -> None:
    value = _value(config, path)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"Config key {'.'.join(path)} must be a number")
    if value < 0 or (positive and value == 0):
        bound = "> 0" if positive else ">= 0"
        raise ConfigError(f"Config key {'.'.join(path)} must be {bound}")


def _require_list(
    config: Dict[str, Any],
    path: tuple[str, ...],
    *,
    item: type,
    choices: set[str] | None = None,
) -> None:
    value = _value(config, path)
    if not isinstance(value, list) or not value:
        raise ConfigError(f"Config key {'.'.join(path)} must be a non-empty list")
    for entry in value:
        if not isinstance(entry, item) or isinstance(entry, bool):
            raise ConfigError(f"Config key {'.'.join(path)} has an invalid entry: {entry!r}")
        if choices is not None and entry not in choices:
            allowed = ", ".join(sorted(choices))
            raise ConfigError(f"Config key {'.'.join(path)} entries must be one of: {allowed}")


def _require_dims(config: Dict[str, Any], path: tuple[str, ...]) -> None:
    _require_list(config, path, item=int)
    if any(k < 3 for k in _value(config, path)):
        raise ConfigError(f"Config key {'.'.join(path)} needs every dimension >= 3")


def _require_gammas(config: Dict[str, Any], path: tuple[str, ...]) -> None:
    value = _value(config, path)
    if not isinstance(value, list) or not value:
        raise ConfigError(f"Config key {'.'.join(path)} must be a non-empty list")
    if any(not isinstance(g, (int, float)) or isinstance(g, bool) or g < 0 for g in value):
        raise ConfigError(f"Config key {'.'.join(path)} must hold non-negative numbers")
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ConfigError(f"Config key {'.'.join(path)} must be strictly increasing")


def _require_supported_ofr(config: Dict[str, Any]) -> None:
    # sweep.policies are checked by SweepSpec.check once the sweep is built
    uses_ofr = _value(config, ("routing", "policy")) == "ofr"
    n = len(_value(config, ("network", "dims")))
    if uses_ofr and _value(config, ("routing", "oidn_cover")) == "reduced" and n not in (2, 3):
        raise UnsupportedConfigError(
            f"reduced OIDN covers exist for 2D and 3D tori only, got {n} dimensions"
        )
