from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Deque, Dict, List, Optional, Sequence, Set, Tuple

from torsim.core.errors import TorsimError
from torsim.core.geometry.topology import Coord, LinkDir, TorusShape
from torsim.core.network.packet import Packet, Phase
from torsim.core.network.vc import (
    ESCAPE_CLASSES,
    ROUTER_CLASSES,
    Insertion,
    VcClass,
    VirtualChannel,
    admit,
    insertion_kind,
)
from torsim.core.routing.idn import OidnCover, Policy, candidate_set
from torsim.core.routing.policy import (
    DerouteDecision,
    OccupancySnapshot,
    choose_idn,
    select_output,
)


class CreditError(TorsimError):
    pass


class CreditEvent(str, Enum):
    SENT = "sent"
    RETURNED = "returned"


class ActionKind(str, Enum):
    DELIVER = "deliver"
    FORWARD = "forward"
    HOLD = "hold"


@dataclass(frozen=True)
class ForwardAction:
    kind: ActionKind
    link: Optional[LinkDir] = None
    vc_class: Optional[VcClass] = None
    insertion: Optional[Insertion] = None


HOLD = ForwardAction(ActionKind.HOLD)
DELIVER = ForwardAction(ActionKind.DELIVER)


@dataclass(frozen=True)
class RoutingParams:
    policy: Policy
    delta: int
    eta: Fraction
    include_widns: bool = True
    cover: OidnCover = OidnCover.REDUCED


@dataclass(eq=False)
class OutputVc:
    """Upstream credit view of one downstream virtual channel.

    ``in_flight`` counts packets still on the wire plus credits travelling back.
    """

    cls: VcClass
    capacity: int
    credits: int
    in_flight: int = 0

    @property
    def free(self) -> int:
        return self.credits

    @property
    def used(self) -> int:
        return self.capacity - self.credits

    def landed(self) -> None:
        self.in_flight -= 1

    def released(self) -> None:
        self.in_flight += 1


@dataclass(eq=False)
class OutputPort:
    link: LinkDir
    vcs: Dict[VcClass, OutputVc]
    busy_until: int = 0


class RouterNode:
    def __init__(
        self,
        coord: Coord,
        shape: TorusShape,
        capacity: int,
        vc_classes: Tuple[VcClass, ...] = ROUTER_CLASSES,
    ) -> None:
        self.coord = coord
        self.shape = shape
        self.capacity = capacity
        self.vc_classes = vc_classes
        self.injection = VirtualChannel(VcClass.INJECTION, capacity)
        self.inputs: Dict[Tuple[LinkDir, VcClass], VirtualChannel] = {}
        self.outputs: Dict[LinkDir, OutputPort] = {}
        for link in shape.links():
            self.outputs[link] = OutputPort(
                link=link,
                vcs={
                    cls: OutputVc(cls=cls, capacity=capacity, credits=capacity)
                    for cls in vc_classes
                },
            )
            for cls in vc_classes:
                self.inputs[(link, cls)] = VirtualChannel(cls, capacity, port=link)
        self._queues: List[VirtualChannel] = [self.injection, *self.inputs.values()]
        self._rr = 0

        self.sink_busy_until = 0
        self.backlog: Deque[Packet] = deque()
        self.injection_port = OutputVc(cls=VcClass.INJECTION, capacity=capacity, credits=capacity)
        self.pump_at: Optional[int] = None
        self.gen_next_allowed = 0
        self.message_index = 0
        self.wakes: Set[int] = set()

    def snapshot(self) -> OccupancySnapshot:
        return OccupancySnapshot(
            used={
                link: {cls: ovc.used for cls, ovc in port.vcs.items()}
                for link, port in self.outputs.items()
            },
            capacity=self.capacity,
            vc_classes=self.vc_classes,
        )

    def output_vc(self, link: Optional[LinkDir], vc_class: VcClass) -> OutputVc:
        if link is None:
            return self.injection_port
        return self.outputs[link].vcs[vc_class]

    def available_links(self, now: int) -> Set[LinkDir]:
        return {link for link, port in self.outputs.items() if port.busy_until <= now}

    def round_robin(self) -> List[VirtualChannel]:
        """Queues in arbitration order; the starting queue rotates on every pass."""
        start = self._rr
        self._rr = (self._rr + 1) % len(self._queues)
        return self._queues[start:] + self._queues[:start]

    def resident(self) -> int:
        return sum(len(vc) for vc in self._queues)


def credit_update(
    node: RouterNode, link: Optional[LinkDir], vc_class: VcClass, event: CreditEvent
) -> OutputVc:
    """Apply a send or a credit return; ``link=None`` addresses the injection link."""
    ovc = node.output_vc(link, vc_class)
    where = "injection" if link is None else f"port {link}"
    if event is CreditEvent.SENT:
        if ovc.credits < 1:
            raise CreditError(f"credit underflow at {node.coord} {where} {vc_class.value}")
        ovc.credits -= 1
        ovc.in_flight += 1
    else:
        if ovc.in_flight < 1 or ovc.credits >= ovc.capacity:
            raise CreditError(f"unexpected credit at {node.coord} {where} {vc_class.value}")
        ovc.in_flight -= 1
        ovc.credits += 1
    return ovc


def decide_deroute(node: RouterNode, packet: Packet, routing: RoutingParams) -> DerouteDecision:
    """Injection-time IDN choice; runs once per packet."""
    candidates = candidate_set(
        packet.source,
        packet.dest,
        routing.policy,
        routing.delta,
        node.shape,
        include_widns=routing.include_widns,
        cover=routing.cover,
    )
    decision = choose_idn(
        packet.source, packet.dest, node.snapshot(), candidates, routing.eta, node.shape
    )
    if decision.candidate is not None:
        packet.assign_idn(decision.candidate)
    packet.routed = True
    return decision


def on_head_of_queue(
    node: RouterNode,
    packet: Packet,
    vc: VirtualChannel,
    routing: RoutingParams,
    now: int,
) -> ForwardAction:
    if vc.cls is VcClass.INJECTION and not packet.routed:
        if packet.source == packet.dest:
            packet.routed = True
            return DELIVER
        decide_deroute(node, packet, routing)

    if node.coord == packet.target:
        if packet.phase is Phase.TO_DEST:
            return DELIVER
        packet.switch_phase()

    choice = select_output(
        packet,
        node.snapshot(),
        routing.policy,
        node.shape,
        available=node.available_links(now),
    )
    if choice is None:
        return HOLD
    insertion = insertion_kind(vc, choice.link, choice.vc_class)
    if not admit(node.outputs[choice.link].vcs[choice.vc_class], insertion):
        return HOLD
    return ForwardAction(ActionKind.FORWARD, choice.link, choice.vc_class, insertion)


def audit_network(nodes: Sequence[RouterNode], shape: TorusShape) -> List[str]:
    """Credit conservation per link VC and one free escape slot per ring.

    Returns a list of human-readable problems; an empty list means the state is sound.
    """
    by_coord = {node.coord: node for node in nodes}
    problems: List[str] = []
    for node in nodes:
        for link, port in node.outputs.items():
            downstream = by_coord[shape.neighbor(node.coord, link)]
            for cls, ovc in port.vcs.items():
                occupancy = len(downstream.inputs[(link, cls)])
                total = ovc.credits + occupancy + ovc.in_flight
                if total != ovc.capacity or occupancy > ovc.capacity:
                    problems.append(
                        f"{node.coord} {link} {cls.value}: credits {ovc.credits} + occupancy "
                        f"{occupancy} + in-flight {ovc.in_flight} != {ovc.capacity}"
                    )
        inj = node.injection_port
        if inj.credits + len(node.injection) + inj.in_flight != inj.capacity:
            problems.append(
                f"{node.coord} injection: credits {inj.credits} + occupancy {len(node.injection)} "
                f"+ in-flight {inj.in_flight} != {inj.capacity}"
            )

    if not nodes:
        return problems
    capacity = nodes[0].capacity
    for cls in ESCAPE_CLASSES:
        if cls not in nodes[0].vc_classes:
            continue
        for link in shape.links():
            rings: Dict[Coord, int] = {}
            sizes: Dict[Coord, int] = {}
            for node in nodes:
                key = node.coord[: link.dim] + node.coord[link.dim + 1 :]
                rings[key] = rings.get(key, 0) + node.outputs[link].vcs[cls].used
                sizes[key] = sizes.get(key, 0) + 1
            for key, used in rings.items():
                if used >= sizes[key] * capacity:
                    problems.append(f"escape ring {link} {cls.value} at {key} has no bubble")
    return problems
