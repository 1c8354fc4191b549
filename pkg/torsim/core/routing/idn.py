from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Set, Tuple

from torsim.core.errors import ContractViolation, UnsupportedConfigError
from torsim.core.geometry.topology import (
    PLUS,
    Coord,
    DimClass,
    LinkClassification,
    LinkDir,
    TorusShape,
    classify_links,
    minimal_next_hops,
    torus_distance,
)


class Policy(str, Enum):
    ABR = "abr"
    POR = "por"
    OFR = "ofr"


class IdnFamily(str, Enum):
    NONE = "none"
    WIDN = "widn"
    OIDN = "oidn"


class OidnCover(str, Enum):
    REDUCED = "reduced"
    FULL = "full"


@dataclass(frozen=True)
class IdnKind:
    family: IdnFamily
    vector: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        allowed = {
            IdnFamily.NONE: set(),
            IdnFamily.WIDN: {0, 1},
            IdnFamily.OIDN: {-1, 0, 1},
        }[self.family]
        if self.family is IdnFamily.NONE and self.vector:
            raise ContractViolation("minimal routing carries no IDN vector")
        if any(v not in allowed for v in self.vector):
            raise ContractViolation(f"invalid {self.family.value} vector {self.vector}")

    @classmethod
    def widn(cls, beta: Sequence[int]) -> "IdnKind":
        return cls(IdnFamily.WIDN, tuple(beta))

    @classmethod
    def oidn(cls, lam: Sequence[int]) -> "IdnKind":
        return cls(IdnFamily.OIDN, tuple(lam))

    def __str__(self) -> str:
        if self.family is IdnFamily.NONE:
            return "none"
        return f"{self.family.value}{list(self.vector)}"


NO_IDN = IdnKind(IdnFamily.NONE)


@dataclass(frozen=True)
class IdnCandidate:
    q: Coord
    kind: IdnKind
    total_dist: int
    dilation: int


# Reduced OIDN covers, written with the equal-coordinate dimensions first and
# every mu-link positively oriented. Keyed by (n, number of equal coordinates).
_REDUCED_LAMBDAS: Dict[Tuple[int, int], Tuple[Tuple[int, ...], ...]] = {
    (3, 0): ((0, -1, 1), (0, 1, -1), (-1, 0, 1), (1, 0, -1), (-1, 1, 0), (1, -1, 0)),
    (3, 1): ((0, -1, 1), (0, 1, -1), (1, 0, 0), (-1, 0, 0)),
    (3, 2): ((1, 0, 1), (-1, 0, 0), (0, 1, -1), (0, -1, 0)),
    (2, 0): ((1, -1), (-1, 1)),
    # collinear: the low-dilation four out of the six admissible outflanks
    (2, 1): ((1, -1), (1, 0), (-1, 0), (-1, 1)),
}


def _minimal_arc_base(si: int, ti: int, k: int) -> int:
    return 0 if abs(si - ti) * 2 <= k else 1


def widn(s: Coord, t: Coord, beta: Sequence[int], shape: TorusShape) -> Coord:
    shape.check(s, t)
    if len(beta) != shape.n or any(b not in (0, 1) for b in beta):
        raise ContractViolation(f"beta must be a binary vector of length {shape.n}")
    return tuple(
        ((si + ti + bi * k) // 2) % k for si, ti, bi, k in zip(s, t, beta, shape.dims)
    )


def oidn(
    s: Coord,
    t: Coord,
    lam: Sequence[int],
    delta: int,
    shape: TorusShape,
    *,
    classification: LinkClassification | None = None,
) -> Coord:
    shape.check(s, t)
    if len(lam) != shape.n or any(v not in (-1, 0, 1) for v in lam):
        raise ContractViolation(f"lambda must be a {{-1,0,1}} vector of length {shape.n}")
    if delta < 1:
        raise ContractViolation("delta must be >= 1")
    if not any(lam):
        raise ContractViolation("all-zero lambda does not outflank: not an OIDN")
    cls = classification or classify_links(s, t, shape)

    q: List[int] = []
    for dim, (si, ti, li, k) in enumerate(zip(s, t, lam, shape.dims)):
        if cls.dim_classes[dim] is DimClass.NU_NU:
            q.append((si + li * delta) % k)
        elif li == 0:
            q.append(((si + ti + _minimal_arc_base(si, ti, k) * k) // 2) % k)
        else:
            anchor = ti if cls.is_mu(LinkDir(dim, li)) else si
            q.append((anchor + li * delta) % k)
    return tuple(q)


def dilation(s: Coord, q: Coord, t: Coord, shape: TorusShape) -> int:
    return torus_distance(s, q, shape) + torus_distance(q, t, shape) - torus_distance(s, t, shape)


def require_cover_support(policy: Policy, cover: OidnCover, shape: TorusShape) -> None:
    if policy is Policy.OFR and cover is OidnCover.REDUCED and shape.n not in (2, 3):
        raise UnsupportedConfigError(
            f"reduced OIDN covers exist for 2D and 3D tori only, got n={shape.n}"
        )


def reduced_lambdas(s: Coord, t: Coord, shape: TorusShape) -> List[Tuple[int, ...]]:
    """Reduced OIDN cover for (s, t), mapped back to the real axes and signs."""
    cls = classify_links(s, t, shape)
    equal = cls.nu_dims
    differing = cls.mu_dims
    table = _REDUCED_LAMBDAS.get((shape.n, len(equal)))
    if table is None:
        if shape.n not in (2, 3):
            raise UnsupportedConfigError(
                f"reduced OIDN covers exist for 2D and 3D tori only, got n={shape.n}"
            )
        return []
    order = equal + differing
    mirrored = {dim for dim in differing if not cls.is_mu(LinkDir(dim, PLUS))}

    vectors: List[Tuple[int, ...]] = []
    for canonical in table:
        lam = [0] * shape.n
        for position, dim in enumerate(order):
            lam[dim] = -canonical[position] if dim in mirrored else canonical[position]
        vectors.append(tuple(lam))
    return vectors


def _uses_nu_link(
    origin: Coord, towards: Coord, cls: LinkClassification, shape: TorusShape
) -> bool:
    return any(not cls.is_mu(link) for link in minimal_next_hops(origin, towards, shape))


def admissible_lambdas(
    s: Coord, t: Coord, delta: int, shape: TorusShape
) -> List[Tuple[int, ...]]:
    """Every lambda whose OIDN takes a nu-link out of s and a nu-link into t."""
    if s == t:
        return []
    at_s = classify_links(s, t, shape)
    at_t = classify_links(t, s, shape)
    vectors: List[Tuple[int, ...]] = []
    for lam in itertools.product((-1, 0, 1), repeat=shape.n):
        if not any(lam):
            continue
        q = oidn(s, t, lam, delta, shape, classification=at_s)
        if q in (s, t):
            continue
        if _uses_nu_link(s, q, at_s, shape) and _uses_nu_link(t, q, at_t, shape):
            vectors.append(lam)
    return vectors


def candidate_set(
    s: Coord,
    t: Coord,
    policy: Policy,
    delta: int,
    shape: TorusShape,
    *,
    include_widns: bool = True,
    cover: OidnCover = OidnCover.REDUCED,
) -> List[IdnCandidate]:
    """IDN candidates in tie-break order: OIDNs as listed, then WIDNs by beta."""
    shape.check(s, t)
    if s == t or policy is Policy.ABR:
        return []
    d = torus_distance(s, t, shape)
    seen: Set[Coord] = {s, t}
    candidates: List[IdnCandidate] = []

    def _add(q: Coord, kind: IdnKind) -> None:
        if q in seen:
            return
        total = torus_distance(s, q, shape) + torus_distance(q, t, shape)
        if kind.family is IdnFamily.WIDN and total == d:
            return
        seen.add(q)
        candidates.append(IdnCandidate(q=q, kind=kind, total_dist=total, dilation=total - d))

    if policy is Policy.OFR:
        if cover is OidnCover.FULL:
            lambdas = admissible_lambdas(s, t, delta, shape)
        else:
            lambdas = reduced_lambdas(s, t, shape)
        cls = classify_links(s, t, shape)
        for lam in lambdas:
            _add(oidn(s, t, lam, delta, shape, classification=cls), IdnKind.oidn(lam))

    if policy is Policy.POR or include_widns:
        for beta in itertools.product((0, 1), repeat=shape.n):
            _add(widn(s, t, beta, shape), IdnKind.widn(beta))

    return candidates


def nu_link_coverage(
    s: Coord, t: Coord, candidates: Sequence[IdnCandidate], shape: TorusShape
) -> Tuple[List[LinkDir], List[LinkDir]]:
    """Nu-links at s and at t that no candidate's minimal route can use."""
    at_s = classify_links(s, t, shape)
    at_t = classify_links(t, s, shape)
    first_hops: Set[LinkDir] = set()
    last_hops: Set[LinkDir] = set()
    for candidate in candidates:
        first_hops.update(minimal_next_hops(s, candidate.q, shape))
        last_hops.update(minimal_next_hops(t, candidate.q, shape))
    missing_s = [link for link in at_s.nu_links() if link not in first_hops]
    missing_t = [link for link in at_t.nu_links() if link not in last_hops]
    return missing_s, missing_t

