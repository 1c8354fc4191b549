from __future__ import annotations

import itertools
import random
from collections import deque
from typing import Dict

import pytest

from torsim.core.errors import ContractViolation, UnsupportedConfigError
from torsim.core.geometry.topology import Coord, TorusShape, minimal_next_hops, torus_distance
from torsim.core.routing.idn import (
    IdnFamily,
    IdnKind,
    OidnCover,
    Policy,
    admissible_lambdas,
    candidate_set,
    dilation,
    nu_link_coverage,
    oidn,
    reduced_lambdas,
    widn,
)

SQUARE16 = TorusShape((16, 16))
CUBE8 = TorusShape((8, 8, 8))
CUBE16 = TorusShape((16, 16, 16))


def test_widn_examples() -> None:
    assert widn((0, 0), (4, 6), (0, 0), SQUARE16) == (2, 3)
    assert widn((0, 0), (4, 6), (1, 1), SQUARE16) == (10, 11)
    assert widn((5, 9), (5, 9), (0, 0), SQUARE16) == (5, 9)


def test_widn_of_minimal_orthant_lies_on_a_shortest_path() -> None:
    s, t = (0, 0), (4, 6)
    q = widn(s, t, (0, 0), SQUARE16)
    assert dilation(s, q, t, SQUARE16) == 0


def test_widn_rejects_bad_beta() -> None:
    with pytest.raises(ContractViolation):
        widn((0, 0), (4, 6), (0, 2), SQUARE16)
    with pytest.raises(ContractViolation):
        widn((0, 0), (4, 6), (0,), SQUARE16)


def test_oidn_collinear_examples() -> None:
    s, t = (0, 0), (6, 0)
    q1 = oidn(s, t, (0, 1), 2, SQUARE16)
    assert q1 == (3, 2)
    assert dilation(s, q1, t, SQUARE16) == 4

    q0 = oidn(s, t, (-1, 1), 2, SQUARE16)
    assert q0 == (14, 2)
    assert torus_distance(s, q0, SQUARE16) == 4
    assert torus_distance(q0, t, SQUARE16) == 10
    assert dilation(s, q0, t, SQUARE16) == 8


def test_oidn_rejects_non_outflanking_lambda() -> None:
    with pytest.raises(ContractViolation):
        oidn((0, 0), (6, 0), (0, 0), 2, SQUARE16)
    with pytest.raises(ContractViolation):
        oidn((0, 0), (6, 0), (0, 1), 0, SQUARE16)


def test_idn_kind_validates_vectors() -> None:
    assert str(IdnKind.oidn((0, -1, 1))) == "oidn[0, -1, 1]"
    with pytest.raises(ContractViolation):
        IdnKind.widn((0, -1))
    with pytest.raises(ContractViolation):
        IdnKind(IdnFamily.NONE, (1,))


def test_candidate_set_counts_in_three_dimensions() -> None:
    s, t = (0, 0, 0), (3, 5, 7)
    ofr = candidate_set(s, t, Policy.OFR, 2, CUBE16)
    assert len(ofr) == 13
    assert [c.kind.family for c in ofr] == [IdnFamily.OIDN] * 6 + [IdnFamily.WIDN] * 7

    por = candidate_set(s, t, Policy.POR, 2, CUBE16)
    assert len(por) == 7
    assert all(c.kind.family is IdnFamily.WIDN for c in por)

    assert candidate_set(s, t, Policy.ABR, 2, CUBE16) == []
    assert candidate_set(s, s, Policy.OFR, 2, CUBE16) == []


def test_candidate_set_excludes_endpoints_and_reports_dilation() -> None:
    s, t = (1, 2, 3), (6, 2, 0)
    d = torus_distance(s, t, CUBE16)
    for candidate in candidate_set(s, t, Policy.OFR, 2, CUBE16):
        assert candidate.q not in (s, t)
        assert candidate.total_dist == (
            torus_distance(s, candidate.q, CUBE16) + torus_distance(candidate.q, t, CUBE16)
        )
        assert candidate.dilation == candidate.total_dist - d


def test_collinear_lambdas_in_listing_order() -> None:
    lambdas = reduced_lambdas((0, 0, 0), (0, 0, 5), CUBE16)
    assert lambdas == [(1, 0, 1), (-1, 0, 0), (0, 1, -1), (0, -1, 0)]


def test_reduced_lambda_counts_by_coplanarity() -> None:
    assert len(reduced_lambdas((0, 0, 0), (3, 5, 7), CUBE16)) == 6
    assert len(reduced_lambdas((0, 0, 0), (3, 5, 0), CUBE16)) == 4
    assert len(reduced_lambdas((0, 0, 0), (0, 0, 5), CUBE16)) == 4


def test_reduced_cover_needs_two_or_three_dimensions() -> None:
    shape = TorusShape((4, 4, 4, 4))
    with pytest.raises(UnsupportedConfigError):
        reduced_lambdas((0, 0, 0, 0), (1, 2, 0, 0), shape)
    full = candidate_set(
        (0, 0, 0, 0), (1, 2, 0, 0), Policy.OFR, 1, shape, cover=OidnCover.FULL
    )
    assert any(c.kind.family is IdnFamily.OIDN for c in full)


def test_two_dimensional_collinear_dilations() -> None:
    s, t = (0, 0), (6, 0)
    reduced = candidate_set(s, t, Policy.OFR, 2, SQUARE16, include_widns=False)
    assert sorted(c.dilation for c in reduced) == [4, 4, 8, 8]

    full = admissible_lambdas(s, t, 2, SQUARE16)
    dilations = {dilation(s, oidn(s, t, lam, 2, SQUARE16), t, SQUARE16) for lam in full}
    assert dilations == {4, 8}


def test_oidn_dilation_bound_on_cube8() -> None:
    delta = 2
    bound = 2 * CUBE8.n * delta
    nodes = list(CUBE8.coords())
    for s in nodes:
        for t in nodes:
            for candidate in candidate_set(s, t, Policy.OFR, delta, CUBE8, include_widns=False):
                assert 0 <= candidate.dilation <= bound, (s, t, candidate)

    for s in [(0, 0, 0), (3, 5, 1), (7, 7, 7), (6, 1, 4)]:
        for t in nodes:
            for candidate in candidate_set(
                s, t, Policy.OFR, delta, CUBE8, include_widns=False, cover=OidnCover.FULL
            ):
                assert 0 <= candidate.dilation <= bound, (s, t, candidate)


def test_oidn_takes_the_midpoint_of_a_wrapping_arc() -> None:
    s, t = (1, 0, 0), (6, 0, 0)
    q = oidn(s, t, (0, 1, 0), 2, CUBE8)
    assert q == (7, 2, 0)
    assert dilation(s, q, t, CUBE8) == 4

    unwrapped = oidn((1, 0, 0), (4, 0, 0), (0, 1, 0), 2, CUBE8)
    assert unwrapped == (2, 2, 0)


def _directions(a: Coord, b: Coord, shape: TorusShape) -> Dict[int, set]:
    signs: Dict[int, set] = {dim: set() for dim in range(shape.n)}
    here = a
    while here != b:
        hops = minimal_next_hops(here, b, shape)
        for link in hops:
            signs[link.dim].add(link.sign)
        here = shape.neighbor(here, hops[0])
    return signs


def test_widn_route_keeps_one_direction_per_moving_dimension() -> None:
    shape = TorusShape((7, 7, 7))
    nodes = list(shape.coords())
    rng = random.Random(5)
    for _ in range(300):
        s, t = rng.choice(nodes), rng.choice(nodes)
        moving = [dim for dim in range(shape.n) if s[dim] != t[dim]]
        chosen = {}
        for beta in itertools.product((0, 1), repeat=shape.n):
            q = widn(s, t, beta, shape)
            first, second = _directions(s, q, shape), _directions(q, t, shape)
            for dim in moving:
                used = first[dim] | second[dim]
                assert len(used) == 1, (s, t, beta)
                chosen[beta, dim] = used.pop()
        for beta in itertools.product((0, 1), repeat=shape.n):
            for dim in moving:
                flipped = tuple(1 - b if i == dim else b for i, b in enumerate(beta))
                assert chosen[beta, dim] != chosen[flipped, dim]


def test_reduced_cover_reaches_every_nu_link() -> None:
    for t in [(3, 5, 7), (3, 5, 0), (0, 0, 5), (8, 1, 0), (8, 8, 8)]:
        s = (0, 0, 0)
        candidates = candidate_set(s, t, Policy.OFR, 2, CUBE16)
        assert nu_link_coverage(s, t, candidates, CUBE16) == ([], [])


def _bfs(source: Coord, shape: TorusShape) -> Dict[Coord, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for link in shape.links():
            nxt = shape.neighbor(node, link)
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


def test_candidate_path_lengths_match_bfs() -> None:
    shape = TorusShape((5, 5, 5))
    nodes = list(shape.coords())
    tables = {node: _bfs(node, shape) for node in nodes}
    rng = random.Random(11)
    for _ in range(1000):
        s, t = rng.choice(nodes), rng.choice(nodes)
        for candidate in candidate_set(s, t, Policy.OFR, 2, shape):
            assert candidate.total_dist == tables[s][candidate.q] + tables[candidate.q][t]
