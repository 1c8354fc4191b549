from __future__ import annotations

import pytest

from torsim.core.errors import TorsimError
from torsim.core.geometry.topology import TorusShape, torus_distance
from torsim.core.routing.idn import IdnFamily, Policy
from torsim.core.sim.engine import Simulation, SimulationError, run
from torsim.core.sim.models import Pattern
from torsim.core.sim.traffic import PatternError


def test_zero_load_produces_no_packets(small_config) -> None:
    result = run(small_config(gamma=0, warmup_ns=None))
    assert result.generated == 0
    assert result.consumed == 0
    assert result.records == []
    assert result.warmup_ns == 0
    assert len(result.probes) == 5
    assert result.measured_consumed == 0


@pytest.mark.parametrize("policy", list(Policy))
def test_single_packet_latency_matches_pipeline(small_config, policy: Policy) -> None:
    cfg = small_config(gamma=0, warmup_ns=None, message_size=1, policy=policy)
    sim = Simulation(cfg)
    source, dest = (0, 0, 0), (2, 1, 0)
    sim.schedule_message(source, dest)
    result = sim.run()

    (record,) = result.records
    d = torus_distance(source, dest, cfg.shape)
    edge = cfg.tx_int_ns + cfg.lat_int_ns
    assert record.lifetime_ns == edge + d * cfg.hop_ns + edge
    assert record.lifetime_ns == 144 + 3 * 405 + 144
    assert record.hops == d
    assert record.family is IdnFamily.NONE


def test_first_packet_of_a_message_is_not_delayed(small_config) -> None:
    cfg = small_config(gamma=0, warmup_ns=None, message_size=6, measure_ns=50_000)
    sim = Simulation(cfg)
    sim.schedule_message((0, 0, 0), (1, 1, 1))
    result = sim.run()

    assert result.consumed == 6
    records = sorted(result.records, key=lambda r: r.id)
    floor = 2 * (cfg.tx_int_ns + cfg.lat_int_ns) + 3 * cfg.hop_ns
    assert records[0].lifetime_ns == floor
    assert all(r.lifetime_ns >= floor for r in records)
    assert all(r.hops == r.expected_hops for r in records)


def test_self_addressed_message_stays_local(small_config) -> None:
    sim = Simulation(small_config(gamma=0, warmup_ns=None))
    sim.schedule_message((1, 1, 1), (1, 1, 1))
    result = sim.run()
    assert result.local_messages == 1
    assert result.generated == 0


def test_runs_are_deterministic(small_config) -> None:
    cfg = small_config(gamma=0.3)
    first, second = run(cfg), run(cfg)
    assert first.trace_digest == second.trace_digest
    assert [r.to_dict() for r in first.records] == [r.to_dict() for r in second.records]

    other = run(small_config(gamma=0.3, seed=2))
    assert other.trace_digest != first.trace_digest


@pytest.mark.parametrize("policy", list(Policy))
@pytest.mark.parametrize("pattern", [Pattern.UNIFORM, Pattern.BITREV, Pattern.TRANSPOSE3D])
def test_light_load_invariants(small_config, policy: Policy, pattern: Pattern) -> None:
    result = run(small_config(gamma=0.3, policy=policy, pattern=pattern))

    assert result.generated > 0
    assert result.stalls == 0
    assert result.hop_violations == 0
    assert result.phase_violations == 0
    for probe in result.probes:
        assert probe.generated == probe.consumed + probe.resident
    for record in result.records:
        assert record.hops == record.expected_hops
        assert record.lifetime_ns >= 2 * 144 + record.hops * 405
    if policy is Policy.ABR:
        assert all(r.family is IdnFamily.NONE for r in result.records)
    if policy is Policy.POR:
        assert all(r.family is not IdnFamily.OIDN for r in result.records)


def test_two_vc_abr_router(small_config) -> None:
    cfg = small_config(gamma=0.3, policy=Policy.ABR, abr_two_vcs=True)
    assert len(cfg.vc_classes) == 2
    result = run(cfg)
    assert result.consumed > 0
    assert result.hop_violations == 0


def test_two_dimensional_torus(small_config) -> None:
    result = run(small_config(shape=TorusShape((6, 6)), gamma=0.3))
    assert result.consumed > 0
    assert result.hop_violations == 0


def test_invalid_pattern_fails_at_startup(small_config) -> None:
    with pytest.raises(PatternError):
        Simulation(small_config(pattern=Pattern.TRANSPOSE, shape=TorusShape((4, 4, 8))))


def test_event_queue_overflow_is_fatal(small_config) -> None:
    with pytest.raises(SimulationError) as excinfo:
        run(small_config(max_events=3))
    assert isinstance(excinfo.value, TorsimError)
    assert excinfo.value.state["events_processed"] == 0


def test_heavy_load_keeps_invariants(small_config) -> None:
    result = run(small_config(gamma=1.2, measure_ns=20_000, pattern=Pattern.BITREV))
    assert result.stalls == 0
    assert result.hop_violations == 0
    assert result.phase_violations == 0


def test_outflank_routes_like_minimal_adaptive_when_no_deroute_pays(small_config) -> None:
    # 4-ary butterfly pairs sit one or two hops apart, closer than any delta-2 outflank repays
    abr = run(small_config(policy=Policy.ABR, pattern=Pattern.BUTTERFLY, gamma=0.6))
    ofr = run(small_config(policy=Policy.OFR, pattern=Pattern.BUTTERFLY, gamma=0.6))
    assert ofr.records
    assert all(record.family is IdnFamily.NONE for record in ofr.records)
    assert ofr.records == abr.records
