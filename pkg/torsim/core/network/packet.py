from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from torsim.core.errors import ContractViolation
from torsim.core.geometry.topology import Coord, TorusShape, torus_distance
from torsim.core.network.vc import VcClass
from torsim.core.routing.idn import NO_IDN, IdnCandidate, IdnKind


class Phase(str, Enum):
    TO_IDN = "to_idn"
    TO_DEST = "to_dest"


@dataclass(slots=True, eq=False)
class Packet:
    id: int
    source: Coord
    dest: Coord
    created_at: int
    size_bytes: int
    idn: Optional[Coord] = None
    idn_kind: IdnKind = NO_IDN
    phase: Phase = Phase.TO_DEST
    hops: int = 0
    consumed_at: Optional[int] = None
    at: Optional[Coord] = None
    ready_at: int = 0
    routed: bool = False
    phase_switches: int = 0

    @property
    def target(self) -> Coord:
        if self.phase is Phase.TO_IDN:
            return self.idn  # type: ignore[return-value]
        return self.dest

    def assign_idn(self, candidate: IdnCandidate) -> None:
        if self.routed:
            raise ContractViolation(f"packet {self.id} was already routed at injection")
        self.idn = candidate.q
        self.idn_kind = candidate.kind
        self.phase = Phase.TO_IDN

    def switch_phase(self) -> None:
        if self.phase is not Phase.TO_IDN:
            raise ContractViolation(f"packet {self.id} has no pending intermediate destination")
        self.phase = Phase.TO_DEST
        self.phase_switches += 1

    def expected_hops(self, shape: TorusShape) -> int:
        if self.idn is None:
            return torus_distance(self.source, self.dest, shape)
        return torus_distance(self.source, self.idn, shape) + torus_distance(
            self.idn, self.dest, shape
        )

    @property
    def lifetime(self) -> Optional[int]:
        if self.consumed_at is None:
            return None
        return self.consumed_at - self.created_at


def escape_class_for(packet: Packet) -> VcClass:
    """Escape subnetwork for the packet's current travel phase."""
    if packet.phase is Phase.TO_IDN:
        return VcClass.ESCAPE_VS1
    return VcClass.ESCAPE_VS2
