from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional

import numpy as np

from torsim.core.errors import ConfigError, UnsupportedConfigError
from torsim.core.geometry.topology import Coord, TorusShape
from torsim.core.sim.models import NS_PER_SECOND, Pattern, SimConfig

PERMUTATIONS = frozenset({Pattern.TRANSPOSE, Pattern.TRANSPOSE3D, Pattern.BITREV})


class PatternError(ConfigError):
    pass


def gamma0_rate(cfg: SimConfig) -> Fraction:
    """Per-node packets/s that saturates the bisection under uniform traffic.

    The bisection cuts the longest dimension, so the rate is 8·B_e / (S_bits · k_max).
    """
    k_max = max(cfg.shape.dims)
    if k_max % 2:
        raise UnsupportedConfigError(
            f"bisection normalization needs an even longest dimension, got {cfg.shape.dims}"
        )
    return Fraction(8 * cfg.bw_ext_bps, cfg.packet_bits * k_max)


def message_interval_ns(cfg: SimConfig) -> Optional[Fraction]:
    """Mean spacing between messages of one node; ``None`` when no traffic is offered."""
    if cfg.gamma <= 0:
        return None
    return Fraction(cfg.message_size * NS_PER_SECOND) / (cfg.gamma * gamma0_rate(cfg))


def injection_pace_ns(cfg: SimConfig) -> int:
    """Spacing of generator-to-router sends: the faster of 2.4·γ0 and the injection link."""
    rate = cfg.injection_rate_factor * gamma0_rate(cfg)
    return max(math.ceil(Fraction(NS_PER_SECOND) / rate), cfg.tx_int_ns)


def default_warmup_ns(cfg: SimConfig) -> int:
    interval = message_interval_ns(cfg)
    if interval is None:
        return 0
    return min(math.ceil(50 * interval), cfg.warmup_cap_ns)


def _log2_exact(value: int) -> Optional[int]:
    if value < 1 or value & (value - 1):
        return None
    return value.bit_length() - 1


def _isqrt_exact(value: int) -> Optional[int]:
    root = math.isqrt(value)
    return root if root * root == value else None


def bit_reverse(index: int, bits: int) -> int:
    out = 0
    for position in range(bits):
        out |= ((index >> position) & 1) << (bits - position - 1)
    return out


def pattern_destination(
    source: Coord,
    message_index: int,
    pattern: Pattern,
    shape: TorusShape,
    rng: Optional[np.random.Generator] = None,
) -> Coord:
    nodes = shape.node_count
    index = shape.linear_index(source)

    if pattern is Pattern.UNIFORM:
        if rng is None:
            raise PatternError("uniform traffic needs a random generator")
        draw = int(rng.integers(0, nodes - 1))
        return shape.coord_of(draw + 1 if draw >= index else draw)

    if pattern is Pattern.TRANSPOSE3D:
        if shape.n != 3 or len(set(shape.dims)) != 1:
            raise PatternError(f"3D transposition needs a k×k×k torus, got {shape.dims}")
        x, y, z = source
        return (y, z, x)

    if pattern is Pattern.TRANSPOSE:
        side = _isqrt_exact(nodes)
        if side is None:
            raise PatternError(f"transposition needs a square node count, got {nodes}")
        row, col = divmod(index, side)
        return shape.coord_of(col * side + row)

    bits = _log2_exact(nodes)
    if bits is None:
        raise PatternError(f"{pattern.value} needs a power-of-two node count, got {nodes}")
    if pattern is Pattern.BUTTERFLY:
        return shape.coord_of(index ^ (1 << (message_index % bits)))
    if pattern is Pattern.BITREV:
        return shape.coord_of(bit_reverse(index, bits))
    raise PatternError(f"unknown traffic pattern {pattern!r}")


def validate_pattern(pattern: Pattern, shape: TorusShape) -> None:
    """Check the pattern's preconditions and, for permutations, that it is a bijection."""
    if pattern is Pattern.UNIFORM:
        if shape.node_count < 2:
            raise PatternError("uniform traffic needs at least two nodes")
        return
    if pattern is Pattern.BUTTERFLY:
        pattern_destination(shape.coord_of(0), 0, pattern, shape)
        return
    images = {pattern_destination(c, 0, pattern, shape) for c in shape.coords()}
    if len(images) != shape.node_count:
        raise PatternError(f"{pattern.value} is not a permutation of {shape.dims}")
