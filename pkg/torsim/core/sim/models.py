from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from torsim.core.geometry.topology import Coord, TorusShape
from torsim.core.network.router import RoutingParams
from torsim.core.network.vc import ROUTER_CLASSES, TWO_VC_CLASSES, VcClass
from torsim.core.routing.idn import IdnFamily, IdnKind, OidnCover, Policy

NS_PER_SECOND = 10**9


class Pattern(str, Enum):
    UNIFORM = "uniform"
    BUTTERFLY = "butterfly"
    TRANSPOSE = "transpose"
    TRANSPOSE3D = "transpose3d"
    BITREV = "bitrev"


def transmission_ns(bits: int, bits_per_second: int) -> int:
    """Serialization time, rounded up to a whole nanosecond."""
    return math.ceil(Fraction(bits * NS_PER_SECOND, bits_per_second))


@dataclass(frozen=True)
class SimConfig:
    shape: TorusShape
    policy: Policy = Policy.OFR
    pattern: Pattern = Pattern.UNIFORM
    gamma: Fraction = Fraction(1, 2)
    packet_size_bytes: int = 512
    capacity: int = 8
    message_size: int = 96
    lat_int_ns: int = 80
    bw_int_bps: int = 64 * 10**9
    lat_ext_ns: int = 200
    bw_ext_bps: int = 20 * 10**9
    injection_rate_factor: Fraction = Fraction(12, 5)
    jitter: Fraction = Fraction(1, 10)
    delta: int = 2
    eta: Fraction = Fraction(2)
    include_widns: bool = True
    oidn_cover: OidnCover = OidnCover.REDUCED
    abr_two_vcs: bool = False
    seed: int = 1
    warmup_ns: Optional[int] = None
    warmup_cap_ns: int = 1_000_000
    measure_ns: int = 2_000_000
    subwindows: int = 4
    max_events: int = 50_000_000
    audit: bool = True
    trace_digest: bool = True
    watchdog_factor: int = 10

    @property
    def packet_bits(self) -> int:
        return self.packet_size_bytes * 8

    @property
    def tx_int_ns(self) -> int:
        return transmission_ns(self.packet_bits, self.bw_int_bps)

    @property
    def tx_ext_ns(self) -> int:
        return transmission_ns(self.packet_bits, self.bw_ext_bps)

    @property
    def hop_ns(self) -> int:
        return self.tx_ext_ns + self.lat_ext_ns

    @property
    def vc_classes(self) -> Tuple[VcClass, ...]:
        if self.policy is Policy.ABR and self.abr_two_vcs:
            return TWO_VC_CLASSES
        return ROUTER_CLASSES

    @property
    def routing(self) -> RoutingParams:
        return RoutingParams(
            policy=self.policy,
            delta=self.delta,
            eta=self.eta,
            include_widns=self.include_widns,
            cover=self.oidn_cover,
        )

    def key(self) -> str:
        return (
            f"{self.policy.value}/{self.pattern.value}/"
            f"{'x'.join(str(k) for k in self.shape.dims)}/g{float(self.gamma):.2f}/s{self.seed}"
        )


@dataclass(frozen=True)
class PacketRecord:
    id: int
    source: Coord
    dest: Coord
    idn: Optional[Coord]
    idn_kind: IdnKind
    hops: int
    expected_hops: int
    created_ns: int
    consumed_ns: int

    @property
    def lifetime_ns(self) -> int:
        return self.consumed_ns - self.created_ns

    @property
    def family(self) -> IdnFamily:
        return self.idn_kind.family

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "source": list(self.source),
            "dest": list(self.dest),
            "idn": list(self.idn) if self.idn is not None else None,
            "idn_kind": self.idn_kind.family.value,
            "hops": self.hops,
            "expected_hops": self.expected_hops,
            "lifetime_ns": self.lifetime_ns,
            "created_ns": self.created_ns,
            "consumed_ns": self.consumed_ns,
        }


@dataclass(frozen=True)
class Probe:
    time_ns: int
    generated: int
    consumed: int
    resident: int
    backlog: int
    in_network: int
    stalls: int
    window_mean_lifetime: Optional[float] = None
    window_consumed: int = 0


@dataclass
class SimResult:
    config: SimConfig
    warmup_ns: int
    end_ns: int
    records: List[PacketRecord] = field(default_factory=list)
    probes: List[Probe] = field(default_factory=list)
    generated: int = 0
    consumed: int = 0
    local_messages: int = 0
    events_processed: int = 0
    stalls: int = 0
    hop_violations: int = 0
    phase_violations: int = 0
    trace_digest: Optional[str] = None

    @property
    def measured_consumed(self) -> int:
        return sum(probe.window_consumed for probe in self.probes)

    def lifetime_series(self) -> List[Optional[float]]:
        return [probe.window_mean_lifetime for probe in self.probes[1:]]

    def backlog_series(self) -> List[float]:
        nodes = self.config.shape.node_count
        return [probe.backlog / nodes for probe in self.probes]
