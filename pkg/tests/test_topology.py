from __future__ import annotations

import itertools
import random
from collections import deque
from typing import Dict

import pytest

from torsim.core.errors import ContractViolation
from torsim.core.geometry.topology import (
    MINUS,
    PLUS,
    Coord,
    DimClass,
    LinkDir,
    TorusShape,
    classify_links,
    dim_order_next_hop,
    minimal_next_hops,
    minimal_signs,
    torus_distance,
)

CUBE8 = TorusShape((8, 8, 8))


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


def test_shape_rejects_short_rings() -> None:
    with pytest.raises(ContractViolation):
        TorusShape((2, 4))
    with pytest.raises(ContractViolation):
        TorusShape(())


def test_linear_index_is_row_major() -> None:
    assert CUBE8.node_count == 512
    assert CUBE8.linear_index((1, 2, 3)) == 83
    assert CUBE8.coord_of(83) == (1, 2, 3)
    assert [CUBE8.linear_index(c) for c in CUBE8.coords()] == list(range(512))
    with pytest.raises(ContractViolation):
        CUBE8.coord_of(512)


def test_neighbor_wraps_around() -> None:
    assert CUBE8.neighbor((7, 0, 0), LinkDir(0, PLUS)) == (0, 0, 0)
    assert CUBE8.neighbor((0, 0, 0), LinkDir(1, MINUS)) == (0, 7, 0)
    assert LinkDir(2, PLUS).reverse == LinkDir(2, MINUS)
    assert str(LinkDir(0, PLUS)) == "1+"
    with pytest.raises(ContractViolation):
        LinkDir(0, 2)


def test_minimal_signs_with_midpoint_tie() -> None:
    assert minimal_signs(0, 3, 8) == (PLUS,)
    assert minimal_signs(0, 5, 8) == (MINUS,)
    assert minimal_signs(0, 4, 8) == (PLUS, MINUS)
    assert minimal_signs(2, 2, 8) == ()


def test_torus_distance_examples() -> None:
    assert torus_distance((0, 0, 0), (1, 2, 3), CUBE8) == 6
    assert torus_distance((0, 0, 0), (7, 0, 0), CUBE8) == 1
    assert torus_distance((0, 0, 0), (4, 5, 1), CUBE8) == 8
    with pytest.raises(ContractViolation):
        torus_distance((0, 0, 8), (0, 0, 0), CUBE8)


def test_torus_distance_matches_bfs() -> None:
    shape = TorusShape((5, 5, 5))
    rng = random.Random(7)
    sources = [tuple(rng.randrange(5) for _ in range(3)) for _ in range(8)]
    for source in sources:
        oracle = _bfs(source, shape)
        for target in shape.coords():
            assert torus_distance(source, target, shape) == oracle[target]


def test_torus_distance_is_a_metric() -> None:
    shape = TorusShape((5, 5))
    nodes = list(shape.coords())
    for a, b in itertools.product(nodes, repeat=2):
        assert torus_distance(a, b, shape) == torus_distance(b, a, shape)
        assert (torus_distance(a, b, shape) == 0) == (a == b)
    for a, b, c in itertools.product(nodes[:10], nodes, nodes[::3]):
        assert torus_distance(a, c, shape) <= torus_distance(a, b, shape) + torus_distance(
            b, c, shape
        )


def test_classify_links_two_dimensional() -> None:
    shape = TorusShape((16, 16))
    diagonal = classify_links((0, 0), (4, 6), shape)
    assert diagonal.dim_classes == (DimClass.MU_NU, DimClass.MU_NU)
    assert diagonal.mu_links() == [LinkDir(0, PLUS), LinkDir(1, PLUS)]

    collinear = classify_links((0, 0), (6, 0), shape)
    assert collinear.dim_classes == (DimClass.MU_NU, DimClass.NU_NU)
    assert collinear.mu_links() == [LinkDir(0, PLUS)]
    assert collinear.nu_links() == [LinkDir(0, MINUS), LinkDir(1, MINUS), LinkDir(1, PLUS)]

    same = classify_links((3, 3), (3, 3), shape)
    assert same.dim_classes == (DimClass.NU_NU, DimClass.NU_NU)
    assert same.mu_links() == []


def test_minimal_next_hops() -> None:
    assert minimal_next_hops((0, 0, 0), (2, 0, 7), CUBE8) == [LinkDir(0, PLUS), LinkDir(2, MINUS)]
    assert minimal_next_hops((0, 0, 0), (4, 0, 0), CUBE8) == [LinkDir(0, PLUS), LinkDir(0, MINUS)]
    assert minimal_next_hops((0, 0, 0), (0, 1, 0), CUBE8) == [LinkDir(1, PLUS)]
    assert minimal_next_hops((1, 1, 1), (1, 1, 1), CUBE8) == []


def test_minimal_next_hops_reduce_distance() -> None:
    shape = TorusShape((5, 6, 4))
    origin = (0, 0, 0)
    for dest in shape.coords():
        d = torus_distance(origin, dest, shape)
        for link in minimal_next_hops(origin, dest, shape):
            assert torus_distance(shape.neighbor(origin, link), dest, shape) == d - 1


def test_dim_order_next_hop() -> None:
    assert dim_order_next_hop((0, 0, 0), (0, 2, 5), CUBE8) == LinkDir(1, PLUS)
    assert dim_order_next_hop((1, 1, 1), (2, 2, 2), CUBE8) == LinkDir(0, PLUS)
    assert dim_order_next_hop((0, 0, 0), (0, 0, 7), CUBE8) == LinkDir(2, MINUS)
    assert dim_order_next_hop((0, 0, 0), (4, 0, 0), CUBE8) == LinkDir(0, PLUS)
    with pytest.raises(ContractViolation):
        dim_order_next_hop((1, 1, 1), (1, 1, 1), CUBE8)


def test_dim_order_walk_reaches_target_in_order() -> None:
    source = (0, 0, 0)
    for dest in [(3, 5, 7), (4, 4, 4), (0, 6, 1), (7, 0, 2)]:
        here, steps, dims = source, 0, []
        while here != dest:
            link = dim_order_next_hop(here, dest, CUBE8)
            dims.append(link.dim)
            here = CUBE8.neighbor(here, link)
            steps += 1
        assert steps == torus_distance(source, dest, CUBE8)
        assert dims == sorted(dims)
