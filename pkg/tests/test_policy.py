from __future__ import annotations

from fractions import Fraction
from typing import Dict

import pytest

from torsim.core.errors import ContractViolation
from torsim.core.geometry.topology import (
    MINUS,
    PLUS,
    LinkDir,
    TorusShape,
    minimal_next_hops,
    torus_distance,
)
from torsim.core.network.packet import Packet
from torsim.core.network.vc import ROUTER_CLASSES, VcClass
from torsim.core.routing.idn import IdnCandidate, IdnKind, Policy, candidate_set
from torsim.core.routing.policy import (
    OccupancySnapshot,
    OutputChoice,
    choose_idn,
    occupancy_stats,
    profit,
    resolve_eta,
    select_output,
)
from torsim.core.sim.models import Pattern
from torsim.core.sim.traffic import pattern_destination

CUBE8 = TorusShape((8, 8, 8))
ADAPTIVE_ONLY = (VcClass.ADAPTIVE,)


def _adaptive_snapshot(loads: Dict[LinkDir, int], capacity: int = 8) -> OccupancySnapshot:
    return OccupancySnapshot(
        used={link: {VcClass.ADAPTIVE: loads.get(link, 0)} for link in CUBE8.links()},
        capacity=capacity,
        vc_classes=ADAPTIVE_ONLY,
    )


def _packet(dest, at=(0, 0, 0)) -> Packet:
    return Packet(id=1, source=(0, 0, 0), dest=dest, created_at=0, size_bytes=512, at=at)


def test_profit_examples() -> None:
    assert profit(0, 0, 10, 14, 2) == Fraction(17, 7)
    assert profit(2, 4, 10, 14, 2) == Fraction(27, 14)
    assert profit(3, 3, 6, 6, 2) == 3
    assert profit(0, 0, 5, 5, Fraction(1)) == 2


def test_profit_contract() -> None:
    with pytest.raises(ContractViolation):
        profit(1, 0, 5, 7, 2)
    with pytest.raises(ContractViolation):
        profit(0, 0, 5, 4, 2)
    with pytest.raises(ContractViolation):
        profit(0, 0, 0, 4, 2)


def test_occupancy_stats() -> None:
    assert occupancy_stats(_adaptive_snapshot({}), (0, 0, 0), (1, 1, 0), CUBE8) == (0, 0)

    loads = {
        LinkDir(0, PLUS): 4,
        LinkDir(1, PLUS): 6,
        LinkDir(0, MINUS): 1,
        LinkDir(1, MINUS): 3,
        LinkDir(2, PLUS): 2,
        LinkDir(2, MINUS): 7,
    }
    snap = _adaptive_snapshot(loads)
    assert occupancy_stats(snap, (0, 0, 0), (1, 1, 0), CUBE8) == (5, 1)
    assert occupancy_stats(snap, (0, 0, 0), (0, 0, 3), CUBE8) == (2, 1)
    with pytest.raises(ContractViolation):
        occupancy_stats(snap, (0, 0, 0), (0, 0, 0), CUBE8)


def test_port_load_averages_over_vc_classes() -> None:
    snap = OccupancySnapshot.empty(CUBE8, 8)
    busy = OccupancySnapshot(
        used={
            **snap.used,
            LinkDir(0, PLUS): {VcClass.ADAPTIVE: 4, VcClass.ESCAPE_VS1: 1, VcClass.ESCAPE_VS2: 1},
        },
        capacity=8,
        vc_classes=ROUTER_CLASSES,
    )
    assert busy.port_load(LinkDir(0, PLUS)) == 2
    assert busy.free(LinkDir(0, PLUS), VcClass.ADAPTIVE) == 4
    with pytest.raises(ContractViolation):
        OccupancySnapshot(used={LinkDir(0, PLUS): {VcClass.ADAPTIVE: 9}}, capacity=8)


def test_empty_network_routes_minimally() -> None:
    s, t = (0, 0, 0), (3, 0, 0)
    candidates = [
        IdnCandidate(q=(0, 1, 0), kind=IdnKind.oidn((0, 1, 0)), total_dist=5, dilation=2),
    ]
    decision = choose_idn(s, t, _adaptive_snapshot({}), candidates, 2, CUBE8)
    assert decision.candidate is None
    assert decision.baseline == 3
    assert decision.chosen.family.value == "none"


def test_saturated_minimal_port_triggers_deroute() -> None:
    s, t = (0, 0, 0), (3, 0, 0)
    candidates = [
        IdnCandidate(q=(0, 1, 0), kind=IdnKind.oidn((0, 1, 0)), total_dist=5, dilation=2),
        IdnCandidate(q=(0, 7, 0), kind=IdnKind.oidn((0, -1, 0)), total_dist=5, dilation=2),
    ]
    snap = _adaptive_snapshot({LinkDir(0, PLUS): 8})
    decision = choose_idn(s, t, snap, candidates, 2, CUBE8)
    assert decision.baseline == 2
    assert decision.profit == Fraction(11, 5)
    # equal profits keep the earlier candidate
    assert decision.candidate is candidates[0]


def test_busier_candidate_is_not_chosen() -> None:
    s, t = (0, 0, 0), (3, 0, 0)
    candidates = [
        IdnCandidate(q=(0, 1, 0), kind=IdnKind.oidn((0, 1, 0)), total_dist=5, dilation=2),
        IdnCandidate(q=(0, 7, 0), kind=IdnKind.oidn((0, -1, 0)), total_dist=5, dilation=2),
    ]
    snap = _adaptive_snapshot({LinkDir(0, PLUS): 8, LinkDir(1, PLUS): 4})
    decision = choose_idn(s, t, snap, candidates, 2, CUBE8)
    assert decision.candidate is candidates[1]


def test_choice_is_scale_invariant() -> None:
    s, t = (0, 0, 0), (3, 0, 0)
    candidates = [
        IdnCandidate(q=(0, 1, 0), kind=IdnKind.oidn((0, 1, 0)), total_dist=5, dilation=2),
        IdnCandidate(q=(0, 0, 1), kind=IdnKind.oidn((0, 0, 1)), total_dist=5, dilation=2),
    ]
    loads = {link: 1 for link in CUBE8.links()}
    loads.update({LinkDir(0, PLUS): 6, LinkDir(1, PLUS): 2})
    low = choose_idn(s, t, _adaptive_snapshot(loads, capacity=16), candidates, 2, CUBE8)
    doubled = {link: 2 * value for link, value in loads.items()}
    high = choose_idn(s, t, _adaptive_snapshot(doubled, capacity=16), candidates, 2, CUBE8)
    assert low.candidate is candidates[1]
    assert high.candidate is candidates[1]


def test_no_candidates_means_minimal() -> None:
    decision = choose_idn((0, 0, 0), (3, 0, 0), _adaptive_snapshot({}), [], 2, CUBE8)
    assert decision.candidate is None


def test_select_output_prefers_least_loaded_adaptive() -> None:
    empty = OccupancySnapshot.empty(CUBE8, 8)
    assert select_output(_packet((2, 0, 0)), empty, Policy.OFR, CUBE8) == OutputChoice(
        LinkDir(0, PLUS), VcClass.ADAPTIVE
    )

    used = {link: dict(per_class) for link, per_class in empty.used.items()}
    used[LinkDir(0, PLUS)][VcClass.ADAPTIVE] = 3
    used[LinkDir(1, PLUS)][VcClass.ADAPTIVE] = 1
    snap = OccupancySnapshot(used=used, capacity=8)
    choice = select_output(_packet((1, 1, 0)), snap, Policy.OFR, CUBE8)
    assert choice == OutputChoice(LinkDir(1, PLUS), VcClass.ADAPTIVE)


def test_select_output_falls_back_to_escape() -> None:
    empty = OccupancySnapshot.empty(CUBE8, 8)
    used = {link: dict(per_class) for link, per_class in empty.used.items()}
    used[LinkDir(0, PLUS)][VcClass.ADAPTIVE] = 8
    snap = OccupancySnapshot(used=used, capacity=8)
    packet = _packet((2, 0, 0))

    assert select_output(packet, snap, Policy.OFR, CUBE8) == OutputChoice(
        LinkDir(0, PLUS), VcClass.ESCAPE_VS2
    )
    held = select_output(packet, snap, Policy.OFR, CUBE8, available={LinkDir(1, PLUS)})
    assert held is None


def test_select_output_requires_a_hop() -> None:
    empty = OccupancySnapshot.empty(CUBE8, 8)
    with pytest.raises(ContractViolation):
        select_output(_packet((0, 0, 0)), empty, Policy.OFR, CUBE8)


def test_resolve_eta_defaults() -> None:
    assert resolve_eta(Policy.OFR, None) == 2
    assert resolve_eta(Policy.POR, None) == 1
    assert resolve_eta(Policy.ABR, None) == 0
    assert resolve_eta(Policy.OFR, 1.5) == Fraction(3, 2)


def _butterfly_deroute_distances(delta: int) -> list[int]:
    """d(s, t) of every k=8 butterfly pair that leaves minimal routing.

    Each pair sees its first minimal port full and every other port empty,
    the most favourable load for a deroute.
    """
    bits = 9
    distances = []
    for s in CUBE8.coords():
        for index in range(bits):
            t = pattern_destination(s, index, Pattern.BUTTERFLY, CUBE8)
            snap = _adaptive_snapshot({minimal_next_hops(s, t, CUBE8)[0]: 8})
            candidates = candidate_set(s, t, Policy.OFR, delta, CUBE8)
            if choose_idn(s, t, snap, candidates, 2, CUBE8).candidate is not None:
                distances.append(torus_distance(s, t, CUBE8))
    return distances


def test_butterfly_on_cube8_never_deroutes_at_default_delta() -> None:
    # butterfly pairs are collinear with d in {1, 2, 4}; at delta 2 every
    # outflank has d_tilde >= d + 4, so 1 + 2d/d_tilde never beats eta = 2
    assert _butterfly_deroute_distances(2) == []


def test_butterfly_on_cube8_deroutes_long_pairs_at_unit_delta() -> None:
    distances = _butterfly_deroute_distances(1)
    assert distances
    assert set(distances) == {4}
