from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import AbstractSet, Mapping, Optional, Sequence, Tuple, Union

from torsim.core.errors import ContractViolation
from torsim.core.geometry.topology import (
    PLUS,
    Coord,
    LinkDir,
    TorusShape,
    dim_order_next_hop,
    minimal_next_hops,
    torus_distance,
)
from torsim.core.network.packet import Packet, escape_class_for
from torsim.core.network.vc import ROUTER_CLASSES, VcClass
from torsim.core.routing.idn import NO_IDN, IdnCandidate, IdnKind, Policy

Number = Union[int, float, Fraction, str]

DEFAULT_ETA = {Policy.OFR: Fraction(2), Policy.POR: Fraction(1)}


def as_fraction(value: Number) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class OccupancySnapshot:
    """Used slots per VC class on each local output port."""

    used: Mapping[LinkDir, Mapping[VcClass, int]]
    capacity: int
    vc_classes: Tuple[VcClass, ...] = ROUTER_CLASSES

    def __post_init__(self) -> None:
        for link, per_class in self.used.items():
            for cls, count in per_class.items():
                if not 0 <= count <= self.capacity:
                    raise ContractViolation(
                        f"port {link} {cls.value} reports {count} used slots, "
                        f"capacity {self.capacity}"
                    )

    @classmethod
    def empty(
        cls,
        shape: TorusShape,
        capacity: int,
        vc_classes: Tuple[VcClass, ...] = ROUTER_CLASSES,
    ) -> "OccupancySnapshot":
        return cls(
            used={link: {c: 0 for c in vc_classes} for link in shape.links()},
            capacity=capacity,
            vc_classes=vc_classes,
        )

    def port_load(self, link: LinkDir) -> Fraction:
        per_class = self.used.get(link, {})
        total = sum(per_class.get(cls, 0) for cls in self.vc_classes)
        return Fraction(total, len(self.vc_classes))

    def used_slots(self, link: LinkDir, cls: VcClass) -> int:
        return self.used.get(link, {}).get(cls, 0)

    def free(self, link: LinkDir, cls: VcClass) -> int:
        return self.capacity - self.used_slots(link, cls)


@dataclass(frozen=True)
class DerouteDecision:
    candidate: Optional[IdnCandidate]
    profit: Fraction
    baseline: Fraction

    @property
    def chosen(self) -> IdnKind:
        return self.candidate.kind if self.candidate else NO_IDN


@dataclass(frozen=True)
class OutputChoice:
    link: LinkDir
    vc_class: VcClass


def occupancy_stats(
    snap: OccupancySnapshot, s: Coord, target: Coord, shape: TorusShape
) -> Tuple[Fraction, Fraction]:
    """(mean load of the ports minimal towards target, least loaded port at s)."""
    if s == target:
        raise ContractViolation("occupancy towards the current node is undefined")
    minimal = minimal_next_hops(s, target, shape)
    u_target = sum((snap.port_load(link) for link in minimal), Fraction(0)) / len(minimal)
    u_star = min(snap.port_load(link) for link in shape.links())
    return u_target, u_star


def profit(u_star: Number, u_q: Number, d: int, d_tilde: int, eta: Number) -> Fraction:
    u_star, u_q, eta = as_fraction(u_star), as_fraction(u_q), as_fraction(eta)
    if d < 1 or d_tilde < d:
        raise ContractViolation(f"profit needs 1 <= d <= d_tilde, got d={d}, d_tilde={d_tilde}")
    if u_star < 0 or u_q < 0:
        raise ContractViolation("occupancies must be non-negative")
    if u_q == 0:
        if u_star > 0:
            raise ContractViolation("minimum occupancy exceeds an empty route's occupancy")
        congestion = Fraction(1)
    else:
        congestion = u_star / u_q
    return congestion + eta * Fraction(d, d_tilde)


def choose_idn(
    s: Coord,
    t: Coord,
    snap: OccupancySnapshot,
    candidates: Sequence[IdnCandidate],
    eta: Number,
    shape: TorusShape,
) -> DerouteDecision:
    if not candidates or s == t:
        return DerouteDecision(candidate=None, profit=Fraction(0), baseline=Fraction(0))
    d = torus_distance(s, t, shape)
    u_0, u_star = occupancy_stats(snap, s, t, shape)
    baseline = profit(u_star, u_0, d, d, eta)

    best: Optional[IdnCandidate] = None
    best_profit = baseline
    for candidate in candidates:
        u_q, _ = occupancy_stats(snap, s, candidate.q, shape)
        value = profit(u_star, u_q, d, candidate.total_dist, eta)
        if value > best_profit:
            best, best_profit = candidate, value
    return DerouteDecision(candidate=best, profit=best_profit, baseline=baseline)


def select_output(
    packet: Packet,
    snap: OccupancySnapshot,
    policy: Policy,
    shape: TorusShape,
    *,
    available: Optional[AbstractSet[LinkDir]] = None,
) -> Optional[OutputChoice]:
    """Adaptive-first output choice; ``None`` means hold the packet.

    Escape admission (bubble rule, credits) is enforced by the router node.
    """
    here = packet.at
    target = packet.target
    if here is None or here == target:
        raise ContractViolation(f"packet {packet.id} has no hop left towards {target}")

    with_space = [
        link
        for link in minimal_next_hops(here, target, shape)
        if snap.free(link, VcClass.ADAPTIVE) >= 1
    ]
    if with_space:
        ready = [link for link in with_space if available is None or link in available]
        if not ready:
            return None
        link = min(
            ready,
            key=lambda lk: (snap.used_slots(lk, VcClass.ADAPTIVE), lk.dim, lk.sign != PLUS),
        )
        return OutputChoice(link, VcClass.ADAPTIVE)

    escape = escape_class_for(packet)
    if escape not in snap.vc_classes:
        raise ContractViolation(f"{policy.value} router has no {escape.value} channel")
    link = dim_order_next_hop(here, target, shape)
    if available is not None and link not in available:
        return None
    return OutputChoice(link, escape)


def resolve_eta(policy: Policy, eta: Optional[Number]) -> Fraction:
    if eta is not None:
        return as_fraction(eta)
    return DEFAULT_ETA.get(policy, Fraction(0))
