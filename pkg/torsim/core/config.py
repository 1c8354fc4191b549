from __future__ import annotations

import copy
import os
import re
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import yaml

from torsim.core.config_schema import validate_config
from torsim.core.errors import ConfigError
from torsim.core.geometry.topology import TorusShape
from torsim.core.routing.idn import OidnCover, Policy
from torsim.core.routing.policy import resolve_eta
from torsim.core.sim.models import Pattern, SimConfig

TORSIM_CONFIG_ENV = "TORSIM_CONFIG"

DEFAULT_GAMMAS = [round(0.05 * step, 2) for step in range(1, 21)]

DEFAULT_CONFIG = {
    "network": {
        "dims": [8, 8, 8],
        "pattern_shape_override": None,
    },
    "router": {
        "capacity": 8,
        "abr_two_vcs": False,
    },
    "links": {
        "packet_size_bytes": 512,
        "lat_int_ns": 80,
        "bw_int_gbps": 64,
        "lat_ext_ns": 200,
        "bw_ext_gbps": 20,
        "injection_rate_factor": 2.4,
    },
    "traffic": {
        "pattern": "uniform",
        "gamma": 0.5,
        "message_size": 96,
        "jitter": 0.10,
    },
    "routing": {
        "policy": "ofr",
        "delta": 2,
        "eta": None,
        "ofr_include_widns": True,
        "oidn_cover": "reduced",
    },
    "run": {
        "seed": 1,
        "warmup_ns": None,
        "warmup_cap_ns": 1_000_000,
        "measure_ns": 2_000_000,
        "subwindows": 4,
        "max_events": 50_000_000,
        "audit": True,
        "trace_digest": True,
        "watchdog_factor": 10,
    },
    "sweep": {
        "gammas": DEFAULT_GAMMAS,
        "seeds": [1],
        "policies": ["abr", "por", "ofr"],
        "patterns": ["uniform"],
        "workers": 1,
    },
    "saturation": {
        "lifetime_ratio": 1.5,
        "backlog_growth_packets": 48,
        "min_packets": 100,
        "extend_on_inconclusive": True,
    },
    "output": {
        "csv": None,
        "packets": None,
    },
    "observability": {
        "log_format": "json",
        "log_level": "INFO",
    },
}

_DURATION_UNITS = {"ns": 1, "us": 1_000, "µs": 1_000, "ms": 1_000_000, "s": 1_000_000_000}
_BANDWIDTH_UNITS = {"m": Fraction(1, 1000), "g": Fraction(1), "t": Fraction(1000)}
_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ns|us|µs|ms|s)?\s*$")
_BANDWIDTH_RE = re.compile(
    r"^\s*(\d+(?:\.\d+)?)\s*(?:([mgt])(?:b/s|bps|bit/s))?\s*$", re.IGNORECASE
)

_DURATION_KEYS = (
    ("links", "lat_int_ns"),
    ("links", "lat_ext_ns"),
    ("run", "warmup_ns"),
    ("run", "warmup_cap_ns"),
    ("run", "measure_ns"),
)
_BANDWIDTH_KEYS = (("links", "bw_int_gbps"), ("links", "bw_ext_gbps"))


def parse_duration(value: Any) -> int:
    """Nanoseconds from an int or a string such as ``80ns``, ``2us``, ``10ms``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid duration: {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise ConfigError(f"duration must be non-negative: {value}")
        return value
    match = _DURATION_RE.match(str(value))
    if not match:
        raise ConfigError(f"invalid duration: {value!r}")
    number, unit = match.groups()
    total = Fraction(number) * _DURATION_UNITS[unit or "ns"]
    if total.denominator != 1:
        raise ConfigError(f"duration {value!r} is not a whole number of nanoseconds")
    return int(total)


def parse_bandwidth(value: Any) -> float:
    """Gb/s from a number or a string such as ``64Gb/s`` or ``500Mbps``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid bandwidth: {value!r}")
    if isinstance(value, (int, float)):
        gbps = Fraction(str(value))
    else:
        match = _BANDWIDTH_RE.match(str(value))
        if not match:
            raise ConfigError(f"invalid bandwidth: {value!r}")
        number, prefix = match.groups()
        gbps = Fraction(number) * _BANDWIDTH_UNITS[(prefix or "g").lower()]
    if gbps <= 0:
        raise ConfigError(f"bandwidth must be positive: {value!r}")
    return float(gbps)


def parse_gamma_list(value: Any) -> List[float]:
    """``0.5``, ``0.1,0.2,0.3`` or an inclusive range ``0.05:1.0:0.05``."""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    text = str(value).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"gamma range must be start:stop:step, got {text!r}")
            start, stop, step = (Fraction(p.strip()) for p in parts)
            if step <= 0:
                raise ConfigError(f"gamma step must be positive, got {text!r}")
            gammas = []
            current = start
            while current <= stop:
                gammas.append(round(float(current), 4))
                current += step
            return gammas
        return [float(Fraction(p.strip())) for p in text.split(",") if p.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid gamma list {text!r}: {exc}") from exc


def _parse_int(value: Any) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected an integer, got {value!r}") from exc


def _parse_float(value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {value!r}") from exc


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _parse_list(value: Any) -> List[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip().lower() for v in value]
    return [part.strip().lower() for part in str(value).split(",") if part.strip()]


def _parse_dims(value: Any) -> List[int]:
    if isinstance(value, (list, tuple)):
        return [_parse_int(v) for v in value]
    parts = re.split(r"[,x×]", str(value).strip().lower())
    return [_parse_int(p) for p in parts if p.strip()]


def _parse_optional_eta(value: Any) -> Optional[float]:
    if value is None or str(value).strip().lower() in {"", "none", "null", "default"}:
        return None
    return _parse_float(value)


KeyPath = Tuple[str, ...]
Assignment = List[Tuple[KeyPath, Any]]


def _one(path: KeyPath, parser: Callable[[Any], Any]) -> Callable[[Any], Assignment]:
    return lambda raw: [(path, parser(raw))]


def _listed(single: KeyPath, many: KeyPath) -> Callable[[Any], Assignment]:
    def _setter(raw: Any) -> Assignment:
        values = _parse_list(raw)
        if not values:
            raise ConfigError(f"empty value for {'.'.join(single)}")
        return [(single, values[0]), (many, values)]

    return _setter


def _gamma_setter(raw: Any) -> Assignment:
    gammas = parse_gamma_list(raw)
    if not gammas:
        raise ConfigError("empty gamma list")
    return [(("traffic", "gamma"), gammas[0]), (("sweep", "gammas"), gammas)]


# Flag name (as used on the command line and in flat key=value files) -> config paths.
FLAG_SETTERS: Dict[str, Callable[[Any], Assignment]] = {
    "k": lambda raw: [(("network", "dims"), [_parse_int(raw)] * 3)],
    "dims": _one(("network", "dims"), _parse_dims),
    "pattern-shape": _one(("network", "pattern_shape_override"), _parse_dims),
    "policy": _listed(("routing", "policy"), ("sweep", "policies")),
    "pattern": _listed(("traffic", "pattern"), ("sweep", "patterns")),
    "gamma": _gamma_setter,
    "delta": _one(("routing", "delta"), _parse_int),
    "eta": _one(("routing", "eta"), _parse_optional_eta),
    "oidn-cover": _one(("routing", "oidn_cover"), lambda v: str(v).strip().lower()),
    "ofr-include-widns": _one(("routing", "ofr_include_widns"), _parse_bool),
    "capacity": _one(("router", "capacity"), _parse_int),
    "abr-two-vcs": _one(("router", "abr_two_vcs"), _parse_bool),
    "packet-size": _one(("links", "packet_size_bytes"), _parse_int),
    "message-size": _one(("traffic", "message_size"), _parse_int),
    "lat-int": _one(("links", "lat_int_ns"), parse_duration),
    "bw-int": _one(("links", "bw_int_gbps"), parse_bandwidth),
    "lat-ext": _one(("links", "lat_ext_ns"), parse_duration),
    "bw-ext": _one(("links", "bw_ext_gbps"), parse_bandwidth),
    "seed": _one(("run", "seed"), _parse_int),
    "seeds": _one(("sweep", "seeds"), lambda v: [_parse_int(p) for p in _parse_list(v)]),
    "warmup": _one(("run", "warmup_ns"), parse_duration),
    "measure": _one(("run", "measure_ns"), parse_duration),
    "workers": _one(("sweep", "workers"), _parse_int),
    "out": _one(("output", "csv"), str),
    "emit-packets": _one(("output", "packets"), str),
    "log-format": _one(("observability", "log_format"), lambda v: str(v).strip().lower()),
    "log-level": _one(("observability", "log_level"), lambda v: str(v).strip().upper()),
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged: Dict[str, Any] = dict(base)
    for key, value in override.items():
        if (
            key in merged
            and isinstance(merged[key], dict)
            and isinstance(value, dict)
        ):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _check_known_keys(data: Dict[str, Any], reference: Dict[str, Any], prefix: str = "") -> None:
    for key, value in data.items():
        if key not in reference:
            raise ConfigError(f"Unknown config key: {prefix}{key}")
        if isinstance(reference[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Config section {prefix}{key} must be a mapping")
            _check_known_keys(value, reference[key], f"{prefix}{key}.")


def _assign(config: Dict[str, Any], path: KeyPath, value: Any) -> None:
    node = config
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value


def _normalize_units(config: Dict[str, Any]) -> Dict[str, Any]:
    for section, key in _DURATION_KEYS:
        value = config[section][key]
        if isinstance(value, str):
            config[section][key] = parse_duration(value)
    for section, key in _BANDWIDTH_KEYS:
        value = config[section][key]
        if isinstance(value, str):
            config[section][key] = parse_bandwidth(value)
    return config


def apply_overrides(config: Dict[str, Any], flags: Mapping[str, Any]) -> Dict[str, Any]:
    """Apply flag-named values (``None`` means not given) over a config copy."""
    updated = copy.deepcopy(config)
    for name, raw in flags.items():
        if raw is None:
            continue
        setter = FLAG_SETTERS.get(name)
        if setter is None:
            raise ConfigError(f"Unknown option: {name}")
        for path, value in setter(raw):
            _assign(updated, path, value)
    return validate_config(_normalize_units(updated))


def parse_flat_config(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {number}: expected key=value, got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in FLAG_SETTERS:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        pairs[key] = value
    return pairs


def load_config(path: Path | None = None) -> Dict[str, Any]:
    if path is None and os.environ.get(TORSIM_CONFIG_ENV):
        path = Path(os.environ[TORSIM_CONFIG_ENV]).expanduser()
    base = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return validate_config(base)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        if path.suffix.lower() in {".yaml", ".yml"}:
            data = yaml.safe_load(path.read_text()) or {}
            if not isinstance(data, dict):
                raise ConfigError("top level must be a mapping")
            _check_known_keys(data, DEFAULT_CONFIG)
            merged = _normalize_units(_deep_merge(base, data))
            return validate_config(merged)
        return apply_overrides(base, parse_flat_config(path.read_text()))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid config at {path}: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"Invalid config at {path}: {exc}") from exc


def _gbps_to_bps(value: Any) -> int:
    return int(Fraction(str(value)) * 10**9)


def sim_config_from(
    config: Dict[str, Any],
    *,
    policy: str | None = None,
    pattern: str | None = None,
    gamma: float | None = None,
    seed: int | None = None,
) -> SimConfig:
    network, router, links = config["network"], config["router"], config["links"]
    traffic, routing, run = config["traffic"], config["routing"], config["run"]

    chosen_policy = Policy(policy or routing["policy"])
    chosen_pattern = Pattern(pattern or traffic["pattern"])
    dims = network["dims"]
    override = network.get("pattern_shape_override")
    if override and chosen_pattern is Pattern.TRANSPOSE:
        dims = override
    chosen_gamma = traffic["gamma"] if gamma is None else gamma

    return SimConfig(
        shape=TorusShape(tuple(dims)),
        policy=chosen_policy,
        pattern=chosen_pattern,
        gamma=Fraction(str(chosen_gamma)),
        packet_size_bytes=links["packet_size_bytes"],
        capacity=router["capacity"],
        message_size=traffic["message_size"],
        lat_int_ns=links["lat_int_ns"],
        bw_int_bps=_gbps_to_bps(links["bw_int_gbps"]),
        lat_ext_ns=links["lat_ext_ns"],
        bw_ext_bps=_gbps_to_bps(links["bw_ext_gbps"]),
        injection_rate_factor=Fraction(str(links["injection_rate_factor"])),
        jitter=Fraction(str(traffic["jitter"])),
        delta=routing["delta"],
        eta=resolve_eta(chosen_policy, routing["eta"]),
        include_widns=routing["ofr_include_widns"],
        oidn_cover=OidnCover(routing["oidn_cover"]),
        abr_two_vcs=router["abr_two_vcs"],
        seed=run["seed"] if seed is None else seed,
        warmup_ns=run["warmup_ns"],
        warmup_cap_ns=run["warmup_cap_ns"],
        measure_ns=run["measure_ns"],
        subwindows=run["subwindows"],
        max_events=run["max_events"],
        audit=run["audit"],
        trace_digest=run["trace_digest"],
        watchdog_factor=run["watchdog_factor"],
    )
