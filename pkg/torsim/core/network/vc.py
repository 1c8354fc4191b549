from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Deque, Optional, Protocol

from torsim.core.errors import TorsimError
from torsim.core.geometry.topology import LinkDir

if TYPE_CHECKING:
    from torsim.core.network.packet import Packet


class VcClass(str, Enum):
    ADAPTIVE = "adaptive"
    ESCAPE_VS1 = "escape_vs1"
    ESCAPE_VS2 = "escape_vs2"
    INJECTION = "injection"


ESCAPE_CLASSES = frozenset({VcClass.ESCAPE_VS1, VcClass.ESCAPE_VS2})
ROUTER_CLASSES = (VcClass.ADAPTIVE, VcClass.ESCAPE_VS1, VcClass.ESCAPE_VS2)
TWO_VC_CLASSES = (VcClass.ADAPTIVE, VcClass.ESCAPE_VS2)


class Insertion(str, Enum):
    PROGRESS = "progress"
    INJECTION = "injection"


class QueueOverflowError(TorsimError):
    pass


class SlotView(Protocol):
    @property
    def cls(self) -> VcClass: ...

    @property
    def free(self) -> int: ...


@dataclass(eq=False)
class VirtualChannel:
    cls: VcClass
    capacity: int
    port: Optional[LinkDir] = None
    fifo: Deque["Packet"] = field(default_factory=deque)

    @property
    def free(self) -> int:
        return self.capacity - len(self.fifo)

    def __len__(self) -> int:
        return len(self.fifo)

    def head(self) -> Optional["Packet"]:
        return self.fifo[0] if self.fifo else None

    def push(self, packet: "Packet") -> None:
        if len(self.fifo) >= self.capacity:
            raise QueueOverflowError(
                f"{self.cls.value} queue on port {self.port} overfilled with packet {packet.id}"
            )
        self.fifo.append(packet)

    def pop(self) -> "Packet":
        return self.fifo.popleft()


def admit(vc: SlotView, insertion: Insertion) -> bool:
    """Bubble-rule admission: escape injections must leave a free slot behind."""
    if vc.cls in ESCAPE_CLASSES and insertion is Insertion.INJECTION:
        return vc.free >= 2
    return vc.free >= 1


def insertion_kind(origin: VirtualChannel, link: LinkDir, cls: VcClass) -> Insertion:
    """Progress only when staying in the same escape ring: same class, same link direction."""
    if cls in ESCAPE_CLASSES and origin.cls is cls and origin.port == link:
        return Insertion.PROGRESS
    return Insertion.INJECTION
