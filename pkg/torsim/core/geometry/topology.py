from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Tuple

from torsim.core.errors import ContractViolation

Coord = Tuple[int, ...]

PLUS = 1
MINUS = -1


@dataclass(frozen=True)
class TorusShape:
    dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(k) for k in self.dims)
        if not dims:
            raise ContractViolation("torus needs at least one dimension")
        if any(k < 3 for k in dims):
            raise ContractViolation(f"every dimension length must be >= 3, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def node_count(self) -> int:
        return math.prod(self.dims)

    def contains(self, c: Coord) -> bool:
        return len(c) == self.n and all(0 <= ci < k for ci, k in zip(c, self.dims))

    def check(self, *coords: Coord) -> None:
        for c in coords:
            if not self.contains(c):
                raise ContractViolation(f"coordinate {c} out of bounds for torus {self.dims}")

    def coords(self) -> Iterator[Coord]:
        return itertools.product(*(range(k) for k in self.dims))

    def linear_index(self, c: Coord) -> int:
        """Row-major index, first dimension most significant."""
        index = 0
        for ci, k in zip(c, self.dims):
            index = index * k + ci
        return index

    def coord_of(self, index: int) -> Coord:
        if not 0 <= index < self.node_count:
            raise ContractViolation(f"node index {index} out of range")
        parts: List[int] = []
        for k in reversed(self.dims):
            index, ci = divmod(index, k)
            parts.append(ci)
        return tuple(reversed(parts))

    def neighbor(self, c: Coord, link: "LinkDir") -> Coord:
        moved = list(c)
        moved[link.dim] = (moved[link.dim] + link.sign) % self.dims[link.dim]
        return tuple(moved)

    def links(self) -> List["LinkDir"]:
        return [LinkDir(dim, sign) for dim in range(self.n) for sign in (PLUS, MINUS)]


class DimClass(str, Enum):
    MU_NU = "mu_nu"
    NU_NU = "nu_nu"


class LinkKind(str, Enum):
    MU = "mu"
    NU = "nu"


@dataclass(frozen=True, order=True)
class LinkDir:
    dim: int
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (PLUS, MINUS):
            raise ContractViolation(f"link sign must be +1 or -1, got {self.sign}")
        if self.dim < 0:
            raise ContractViolation(f"link dimension must be >= 0, got {self.dim}")

    @property
    def reverse(self) -> "LinkDir":
        return LinkDir(self.dim, -self.sign)

    def __str__(self) -> str:
        return f"{self.dim + 1}{'+' if self.sign == PLUS else '-'}"


@dataclass(frozen=True)
class LinkClassification:
    dim_classes: Tuple[DimClass, ...]
    kinds: Dict[LinkDir, LinkKind] = field(default_factory=dict)

    @property
    def mu_dims(self) -> List[int]:
        return [i for i, cls in enumerate(self.dim_classes) if cls is DimClass.MU_NU]

    @property
    def nu_dims(self) -> List[int]:
        return [i for i, cls in enumerate(self.dim_classes) if cls is DimClass.NU_NU]

    def mu_links(self) -> List[LinkDir]:
        return sorted(link for link, kind in self.kinds.items() if kind is LinkKind.MU)

    def nu_links(self) -> List[LinkDir]:
        return sorted(link for link, kind in self.kinds.items() if kind is LinkKind.NU)

    def is_mu(self, link: LinkDir) -> bool:
        return self.kinds[link] is LinkKind.MU


def minimal_signs(a: int, b: int, k: int) -> Tuple[int, ...]:
    """Directions along one ring that lie on a shortest a -> b path.

    Both signs are returned at the even-k midpoint.
    """
    forward = (b - a) % k
    if forward == 0:
        return ()
    backward = k - forward
    if forward < backward:
        return (PLUS,)
    if forward > backward:
        return (MINUS,)
    return (PLUS, MINUS)


def ring_distance(a: int, b: int, k: int) -> int:
    diff = abs(a - b)
    return min(diff, k - diff)


def torus_distance(s: Coord, t: Coord, shape: TorusShape) -> int:
    shape.check(s, t)
    return sum(ring_distance(si, ti, k) for si, ti, k in zip(s, t, shape.dims))


def classify_links(s: Coord, t: Coord, shape: TorusShape) -> LinkClassification:
    shape.check(s, t)
    dim_classes: List[DimClass] = []
    kinds: Dict[LinkDir, LinkKind] = {}
    for dim, (si, ti, k) in enumerate(zip(s, t, shape.dims)):
        signs = minimal_signs(si, ti, k)
        dim_classes.append(DimClass.MU_NU if signs else DimClass.NU_NU)
        for sign in (PLUS, MINUS):
            kinds[LinkDir(dim, sign)] = LinkKind.MU if sign in signs else LinkKind.NU
    return LinkClassification(dim_classes=tuple(dim_classes), kinds=kinds)


def minimal_next_hops(c: Coord, dest: Coord, shape: TorusShape) -> List[LinkDir]:
    """Links out of ``c`` that reduce the distance to ``dest`` by one.

    Empty when ``c == dest``; the caller consumes the packet in that case.
    """
    shape.check(c, dest)
    hops: List[LinkDir] = []
    for dim, (ci, di, k) in enumerate(zip(c, dest, shape.dims)):
        for sign in minimal_signs(ci, di, k):
            hops.append(LinkDir(dim, sign))
    return hops


def dim_order_next_hop(c: Coord, dest: Coord, shape: TorusShape) -> LinkDir:
    """Escape-network hop: lowest unresolved dimension, ``+`` on the midpoint tie."""
    shape.check(c, dest)
    for dim, (ci, di, k) in enumerate(zip(c, dest, shape.dims)):
        signs = minimal_signs(ci, di, k)
        if signs:
            return LinkDir(dim, signs[0])
    raise ContractViolation(f"no next hop: {c} is already the destination")
