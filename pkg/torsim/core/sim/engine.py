from __future__ import annotations

import heapq
import itertools
import logging
import math
from enum import IntEnum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from torsim.core.errors import TorsimError
from torsim.core.geometry.topology import Coord, LinkDir
from torsim.core.network.packet import Packet
from torsim.core.network.router import (
    ActionKind,
    CreditError,
    CreditEvent,
    ForwardAction,
    RouterNode,
    audit_network,
    credit_update,
    on_head_of_queue,
)
from torsim.core.network.vc import VcClass, VirtualChannel
from torsim.core.sim.models import PacketRecord, Probe, SimConfig, SimResult
from torsim.core.sim.trace import TraceDigest
from torsim.core.sim.traffic import (
    default_warmup_ns,
    injection_pace_ns,
    message_interval_ns,
    pattern_destination,
    validate_pattern,
)

LOGGER = logging.getLogger(__name__)


class SimulationError(TorsimError):
    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.state = state or {}


class EventKind(IntEnum):
    GENERATION = 0
    GEN_PUMP = 1
    ARRIVAL = 2
    CREDIT_RETURN = 3
    WAKE = 4
    PROBE = 5


Event = Tuple[int, int, EventKind, int, Any]


class Simulation:
    """One seeded store-and-forward run over a torus of router nodes.

    Events are processed in (time, sequence) order. Packets hold a slot in the
    downstream channel from the moment they are sent and become eligible for
    forwarding once the link's serialization and latency have elapsed.
    """

    def __init__(self, cfg: SimConfig) -> None:
        validate_pattern(cfg.pattern, cfg.shape)
        self.cfg = cfg
        self.shape = cfg.shape
        self.routing = cfg.routing
        # coords() is row-major, so list position equals linear_index
        self.nodes: List[RouterNode] = [
            RouterNode(coord, cfg.shape, cfg.capacity, cfg.vc_classes)
            for coord in cfg.shape.coords()
        ]

        self.rng = np.random.default_rng(cfg.seed)
        self.interval = message_interval_ns(cfg)
        self.pace_ns = injection_pace_ns(cfg)
        self.warmup_ns = cfg.warmup_ns if cfg.warmup_ns is not None else default_warmup_ns(cfg)
        self.end_ns = self.warmup_ns + cfg.measure_ns
        self.watchdog_ns = cfg.watchdog_factor * cfg.hop_ns

        self.now = 0
        self._heap: List[Event] = []
        self._seq = itertools.count()
        self._packet_ids = itertools.count()
        self._trace = TraceDigest() if cfg.trace_digest else None

        self.generated = 0
        self.consumed = 0
        self.in_network = 0
        self.local_messages = 0
        self.events_processed = 0
        self.stalls = 0
        self.hop_violations = 0
        self.phase_violations = 0
        self._last_move = 0
        self._stalled = False

        self._window_sum = [0] * cfg.subwindows
        self._window_count = [0] * cfg.subwindows
        self._probe_rows: List[Tuple[int, int, int, int, int, int, int]] = []
        self.records: List[PacketRecord] = []

    # -- scheduling -------------------------------------------------------

    def schedule(self, time_ns: int, kind: EventKind, node: int, payload: Any = None) -> None:
        if time_ns < self.now:
            raise SimulationError(
                f"event {kind.name} scheduled in the past ({time_ns} < {self.now})",
                self.state(),
            )
        heapq.heappush(self._heap, (time_ns, next(self._seq), kind, node, payload))
        if len(self._heap) > self.cfg.max_events:
            raise SimulationError("event queue overflow", self.state())

    def schedule_message(self, source: Coord, dest: Coord, at_ns: int = 0) -> None:
        """Queue one explicit message, independent of the configured traffic pattern."""
        self.shape.check(source, dest)
        self.schedule(at_ns, EventKind.GENERATION, self.shape.linear_index(source), dest)

    def _wake(self, idx: int, time_ns: int) -> None:
        node = self.nodes[idx]
        if time_ns in node.wakes:
            return
        node.wakes.add(time_ns)
        self.schedule(time_ns, EventKind.WAKE, idx)

    def _schedule_pump(self, idx: int, time_ns: int) -> None:
        node = self.nodes[idx]
        if node.pump_at is not None:
            return
        node.pump_at = time_ns
        self.schedule(time_ns, EventKind.GEN_PUMP, idx)

    def _index_of(self, coord: Coord) -> int:
        return self.shape.linear_index(coord)

    # -- main loop --------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        LOGGER.info(
            "simulation started",
            extra={
                "fields": {
                    "run": cfg.key(),
                    "warmup_ns": self.warmup_ns,
                    "measure_ns": cfg.measure_ns,
                    "nodes": self.shape.node_count,
                }
            },
        )
        if self.interval is not None:
            for idx in range(len(self.nodes)):
                offset = math.ceil(float(self.interval) * self.rng.uniform(0.0, 1.0))
                self.schedule(offset, EventKind.GENERATION, idx)
        for i in range(cfg.subwindows + 1):
            self.schedule(
                self.warmup_ns + cfg.measure_ns * i // cfg.subwindows, EventKind.PROBE, -1
            )

        handlers = {
            EventKind.GENERATION: self._on_generation,
            EventKind.GEN_PUMP: self._on_pump,
            EventKind.ARRIVAL: self._on_arrival,
            EventKind.CREDIT_RETURN: self._on_credit,
            EventKind.WAKE: self._on_wake,
            EventKind.PROBE: self._on_probe,
        }
        while self._heap and self._heap[0][0] <= self.end_ns:
            time_ns, _, kind, idx, payload = heapq.heappop(self._heap)
            self.now = time_ns
            self.events_processed += 1
            if self._trace is not None:
                detail = payload[0].id if kind is EventKind.ARRIVAL else -1
                self._trace.update(time_ns, int(kind), idx, detail)
            self._check_watchdog()
            handlers[kind](idx, payload)

        if not self._heap and self.in_network:
            raise SimulationError(
                "event queue exhausted with packets in the network", self.state()
            )

        result = self._result()
        LOGGER.info(
            "simulation finished",
            extra={
                "fields": {
                    "run": cfg.key(),
                    "events": self.events_processed,
                    "generated": self.generated,
                    "consumed": self.consumed,
                    "stalls": self.stalls,
                }
            },
        )
        return result

    # -- event handlers ---------------------------------------------------

    def _on_generation(self, idx: int, explicit_dest: Optional[Coord]) -> None:
        cfg = self.cfg
        node = self.nodes[idx]
        if explicit_dest is None:
            dest = pattern_destination(
                node.coord, node.message_index, cfg.pattern, self.shape, self.rng
            )
            jitter = float(cfg.jitter)
            gap = float(self.interval) * (1.0 + self.rng.uniform(-jitter, jitter))
            self.schedule(self.now + max(1, round(gap)), EventKind.GENERATION, idx)
        else:
            dest = explicit_dest
        node.message_index += 1

        if dest == node.coord:
            self.local_messages += 1
            return
        for _ in range(cfg.message_size):
            node.backlog.append(
                Packet(
                    id=next(self._packet_ids),
                    source=node.coord,
                    dest=dest,
                    created_at=self.now,
                    size_bytes=cfg.packet_size_bytes,
                )
            )
        self.generated += cfg.message_size
        self._pump(idx)

    def _on_pump(self, idx: int, _payload: Any) -> None:
        self.nodes[idx].pump_at = None
        self._pump(idx)

    def _pump(self, idx: int) -> None:
        node = self.nodes[idx]
        if not node.backlog:
            return
        if node.gen_next_allowed > self.now:
            self._schedule_pump(idx, node.gen_next_allowed)
            return
        if node.injection_port.credits < 1:
            return
        packet = node.backlog.popleft()
        credit_update(node, None, VcClass.INJECTION, CreditEvent.SENT)
        node.gen_next_allowed = self.now + self.pace_ns
        self.in_network += 1
        self._moved()
        self.schedule(
            self.now + self.cfg.tx_int_ns + self.cfg.lat_int_ns,
            EventKind.ARRIVAL,
            idx,
            (packet, None, VcClass.INJECTION),
        )
        if node.backlog:
            self._schedule_pump(idx, node.gen_next_allowed)

    def _on_arrival(
        self, idx: int, payload: Tuple[Packet, Optional[LinkDir], VcClass]
    ) -> None:
        packet, link, cls = payload
        node = self.nodes[idx]
        if link is None:
            node.injection_port.landed()
            vc = node.injection
        else:
            upstream = self.nodes[self._index_of(self.shape.neighbor(node.coord, link.reverse))]
            upstream.outputs[link].vcs[cls].landed()
            vc = node.inputs[(link, cls)]
        packet.at = node.coord
        packet.ready_at = self.now
        vc.push(packet)
        self._wake(idx, self.now)

    def _on_credit(self, idx: int, payload: Tuple[Optional[LinkDir], VcClass]) -> None:
        link, cls = payload
        credit_update(self.nodes[idx], link, cls, CreditEvent.RETURNED)
        if link is None:
            self._pump(idx)
        else:
            self._wake(idx, self.now)

    def _on_wake(self, idx: int, _payload: Any) -> None:
        self.nodes[idx].wakes.discard(self.now)
        self._route(idx)

    def _on_probe(self, _idx: int, _payload: Any) -> None:
        backlog = sum(len(node.backlog) for node in self.nodes)
        resident = backlog + self.in_network
        if self.generated != self.consumed + resident:
            LOGGER.error("packet conservation violated", extra={"fields": self.state()})
            raise SimulationError("packet conservation violated", self.state())
        if self.cfg.audit:
            problems = audit_network(self.nodes, self.shape)
            if problems:
                LOGGER.error(
                    "network audit failed",
                    extra={"fields": {"problems": problems[:10], "time_ns": self.now}},
                )
                raise CreditError(f"network audit failed at {self.now} ns: {problems[0]}")
        self._probe_rows.append(
            (
                self.now,
                self.generated,
                self.consumed,
                resident,
                backlog,
                self.in_network,
                self.stalls,
            )
        )

    # -- switching --------------------------------------------------------

    def _route(self, idx: int) -> None:
        node = self.nodes[idx]
        progressed = True
        while progressed:
            progressed = False
            for vc in node.round_robin():
                packet = vc.head()
                if packet is None or packet.ready_at > self.now:
                    continue
                action = on_head_of_queue(node, packet, vc, self.routing, self.now)
                if action.kind is ActionKind.HOLD:
                    continue
                if action.kind is ActionKind.DELIVER:
                    if node.sink_busy_until > self.now:
                        self._wake(idx, node.sink_busy_until)
                        continue
                    self._pop(idx, vc)
                    self._deliver(idx, packet)
                else:
                    self._forward(idx, vc, packet, action)
                progressed = True

    def _pop(self, idx: int, vc: VirtualChannel) -> Packet:
        node = self.nodes[idx]
        packet = vc.pop()
        if vc.cls is VcClass.INJECTION:
            node.injection_port.released()
            self.schedule(
                self.now + self.cfg.lat_int_ns,
                EventKind.CREDIT_RETURN,
                idx,
                (None, VcClass.INJECTION),
            )
        else:
            assert vc.port is not None
            up_idx = self._index_of(self.shape.neighbor(node.coord, vc.port.reverse))
            self.nodes[up_idx].outputs[vc.port].vcs[vc.cls].released()
            self.schedule(
                self.now + self.cfg.lat_ext_ns,
                EventKind.CREDIT_RETURN,
                up_idx,
                (vc.port, vc.cls),
            )
        return packet

    def _forward(
        self, idx: int, vc: VirtualChannel, packet: Packet, action: ForwardAction
    ) -> None:
        assert action.link is not None and action.vc_class is not None
        node = self.nodes[idx]
        self._pop(idx, vc)
        credit_update(node, action.link, action.vc_class, CreditEvent.SENT)
        port = node.outputs[action.link]
        port.busy_until = self.now + self.cfg.tx_ext_ns
        packet.hops += 1
        self._moved()
        down_idx = self._index_of(self.shape.neighbor(node.coord, action.link))
        self.schedule(
            port.busy_until + self.cfg.lat_ext_ns,
            EventKind.ARRIVAL,
            down_idx,
            (packet, action.link, action.vc_class),
        )
        self._wake(idx, port.busy_until)

    def _deliver(self, idx: int, packet: Packet) -> None:
        cfg = self.cfg
        node = self.nodes[idx]
        node.sink_busy_until = self.now + cfg.tx_int_ns
        self._wake(idx, node.sink_busy_until)
        packet.consumed_at = node.sink_busy_until + cfg.lat_int_ns
        self.consumed += 1
        self.in_network -= 1
        self._moved()

        expected = packet.expected_hops(self.shape)
        if packet.hops != expected:
            self.hop_violations += 1
            LOGGER.error(
                "packet hop count differs from its route length",
                extra={"fields": {"packet": packet.id, "hops": packet.hops, "expected": expected}},
            )
        if packet.phase_switches != (1 if packet.idn is not None else 0):
            self.phase_violations += 1
            LOGGER.error(
                "packet phase switched an unexpected number of times",
                extra={"fields": {"packet": packet.id, "switches": packet.phase_switches}},
            )

        lifetime = packet.consumed_at - packet.created_at
        offset = packet.consumed_at - self.warmup_ns
        if 0 <= offset < cfg.measure_ns:
            window = offset * cfg.subwindows // cfg.measure_ns
            self._window_sum[window] += lifetime
            self._window_count[window] += 1
        if packet.created_at >= self.warmup_ns:
            self.records.append(
                PacketRecord(
                    id=packet.id,
                    source=packet.source,
                    dest=packet.dest,
                    idn=packet.idn,
                    idn_kind=packet.idn_kind,
                    hops=packet.hops,
                    expected_hops=expected,
                    created_ns=packet.created_at,
                    consumed_ns=packet.consumed_at,
                )
            )

    # -- watchdog and bookkeeping -----------------------------------------

    def _moved(self) -> None:
        self._last_move = self.now
        self._stalled = False

    def _check_watchdog(self) -> None:
        if self._stalled or not self.in_network:
            return
        if self.now - self._last_move > self.watchdog_ns:
            self._stalled = True
            self.stalls += 1
            LOGGER.warning(
                "no packet movement within the watchdog interval",
                extra={
                    "fields": {
                        "time_ns": self.now,
                        "idle_ns": self.now - self._last_move,
                        "in_network": self.in_network,
                    }
                },
            )

    def state(self) -> Dict[str, Any]:
        return {
            "time_ns": self.now,
            "events_processed": self.events_processed,
            "pending_events": len(self._heap),
            "generated": self.generated,
            "consumed": self.consumed,
            "in_network": self.in_network,
            "backlog": sum(len(node.backlog) for node in self.nodes),
            "resident_in_routers": sum(node.resident() for node in self.nodes),
            "stalls": self.stalls,
        }

    def _result(self) -> SimResult:
        probes: List[Probe] = []
        for i, row in enumerate(self._probe_rows):
            time_ns, generated, consumed, resident, backlog, in_network, stalls = row
            mean: Optional[float] = None
            count = 0
            if i > 0 and i - 1 < len(self._window_count):
                count = self._window_count[i - 1]
                if count:
                    mean = self._window_sum[i - 1] / count
            probes.append(
                Probe(
                    time_ns=time_ns,
                    generated=generated,
                    consumed=consumed,
                    resident=resident,
                    backlog=backlog,
                    in_network=in_network,
                    stalls=stalls,
                    window_mean_lifetime=mean,
                    window_consumed=count,
                )
            )
        return SimResult(
            config=self.cfg,
            warmup_ns=self.warmup_ns,
            end_ns=self.end_ns,
            records=self.records,
            probes=probes,
            generated=self.generated,
            consumed=self.consumed,
            local_messages=self.local_messages,
            events_processed=self.events_processed,
            stalls=self.stalls,
            hop_violations=self.hop_violations,
            phase_violations=self.phase_violations,
            trace_digest=self._trace.hexdigest() if self._trace is not None else None,
        )


def run(cfg: SimConfig) -> SimResult:
    return Simulation(cfg).run()
