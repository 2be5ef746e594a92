from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diamond_gmc import lattice
from diamond_gmc.errors import AddressError, RegimeError
from diamond_gmc.lattice import EdgeAddress, LatticeParams, VertexAddress
from diamond_gmc.rng import make_rng

P23 = LatticeParams(2, 3)
PARAMS = [LatticeParams(2, 3), LatticeParams(3, 4), LatticeParams(2, 5), LatticeParams(3, 2)]


def bfs_distances(params, n, source):
    """Oracle: plain BFS over the level-n bond graph built from edge endpoints."""
    adj = {}
    for e in lattice.iter_edges(params, n):
        u, v = lattice.edge_endpoints(params, e)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return {v: Fraction(d, params.s**n) for v, d in dist.items()}


def test_params_validation():
    with pytest.raises(ValueError):
        LatticeParams(1, 3)
    with pytest.raises(ValueError):
        LatticeParams(2, 1)
    with pytest.raises(RegimeError):
        LatticeParams(3, 2).require_gmc()
    assert P23.gmc_regime() and P23.bs == 6


@pytest.mark.parametrize("params", PARAMS)
def test_counts(params):
    b, s = params.b, params.s
    for n in range(4):
        assert lattice.edge_count(params, n) == (b * s) ** n
        assert lattice.path_count(params, n) == b ** ((s**n - 1) // (s - 1))
        assert lattice.vertex_count(params, n) == len(list(lattice.iter_vertices(params, n)))
        assert lattice.cell_measure(params, lattice.edge_from_index(params, n, 0)) == Fraction(1, (b * s) ** n)


@pytest.mark.parametrize("params", PARAMS)
def test_edge_index_roundtrip(params):
    for n in range(3):
        for idx in range(lattice.edge_count(params, n)):
            e = lattice.edge_from_index(params, n, idx)
            assert lattice.edge_index(params, e) == idx
            assert EdgeAddress.parse(str(e)) == e


@given(st.lists(st.tuples(st.integers(1, 2), st.integers(1, 3)), max_size=6))
def test_edge_parse_roundtrip(letters):
    e = EdgeAddress(tuple(letters))
    assert EdgeAddress.parse(str(e)) == e
    assert e.level == len(letters)
    for k in range(e.level + 1):
        assert e.ancestor(k).is_ancestor_of(e)


def test_bad_addresses():
    with pytest.raises(AddressError):
        lattice.check_edge(P23, EdgeAddress(((3, 1),)))
    with pytest.raises(AddressError):
        lattice.check_edge(P23, EdgeAddress(((1, 4),)))
    with pytest.raises(AddressError):
        lattice.check_vertex(P23, VertexAddress(prefix=EdgeAddress(()), branch=1, cut=3))
    with pytest.raises(AddressError):
        lattice.edge_from_index(P23, 1, 6)


def test_vertex_parse_roundtrip():
    for v in lattice.iter_vertices(P23, 3):
        assert VertexAddress.parse(str(v)) == v


def test_letter_arrays_match_addresses():
    br, seg = lattice.letter_arrays(P23, 3)
    for idx, e in enumerate(lattice.iter_edges(P23, 3)):
        assert tuple(zip(br[idx], seg[idx])) == e.letters


def test_cell_intervals_tile_unit_interval_along_each_branch():
    # the s^n cells met by one path cover [0,1] without gaps
    n = 2
    cells = [EdgeAddress(((1, j1), (1, j2))) for j1 in range(1, 4) for j2 in range(1, 4)]
    ivs = sorted(lattice.projective_coordinate(P23, e) for e in cells)
    assert ivs[0][0] == 0 and ivs[-1][1] == 1
    assert all(a[1] == b[0] for a, b in zip(ivs, ivs[1:]))
    assert all(hi - lo == Fraction(1, 3**n) for lo, hi in ivs)


@pytest.mark.parametrize("params", [LatticeParams(2, 3), LatticeParams(3, 2), LatticeParams(2, 4)])
def test_metric_matches_bfs_oracle(params):
    n = 2
    verts = list(lattice.iter_vertices(params, n))
    rng = make_rng(1, 2)
    for src in [verts[int(i)] for i in rng.integers(len(verts), size=6)] + [lattice.VERTEX_A]:
        oracle = bfs_distances(params, n, src)
        for v in verts:
            assert lattice.metric_distance(params, src, v, n) == oracle[v]


def test_root_distance_is_one():
    for n in range(5):
        assert lattice.metric_distance(P23, lattice.VERTEX_A, lattice.VERTEX_B, n) == 1


def test_metric_level_independent():
    # distances between generation-<=2 vertices do not change when refined
    rng = make_rng(3)
    for _ in range(50):
        x, y = lattice.random_vertex(P23, 2, rng), lattice.random_vertex(P23, 2, rng)
        d = lattice.metric_distance(P23, x, y, 2)
        assert lattice.metric_distance(P23, x, y, 3) == d


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_axioms(seed):
    rng = make_rng(seed)
    x, y, z = (lattice.random_vertex(P23, 3, rng) for _ in range(3))
    dxy = lattice.metric_distance(P23, x, y, 3)
    assert dxy == lattice.metric_distance(P23, y, x, 3)
    assert (dxy == 0) == (x == y)
    assert lattice.metric_distance(P23, x, z, 3) <= dxy + lattice.metric_distance(P23, y, z, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(1, 3))
def test_similitude_contracts_by_s(seed, i, j):
    rng = make_rng(seed)
    x, y = lattice.random_vertex(P23, 2, rng), lattice.random_vertex(P23, 2, rng)
    fx, fy = lattice.similitude(P23, (i, j), x), lattice.similitude(P23, (i, j), y)
    assert lattice.metric_distance(P23, fx, fy, 3) == lattice.metric_distance(P23, x, y, 2) / 3


def test_similitude_of_cells_is_prefixing():
    e = EdgeAddress(((2, 1), (1, 3)))
    assert lattice.similitude(P23, (1, 2), e) == EdgeAddress(((1, 2), (2, 1), (1, 3)))


def test_cell_distance_bracket():
    e1, e2 = EdgeAddress(((1, 1), (1, 1))), EdgeAddress(((2, 3), (1, 3)))
    est, err = lattice.cell_distance(P23, e1, e2)
    assert err == Fraction(2, 9)
    # A lies in e1 and B in e2, so d(A,B) = 1 must be within the bracket
    assert abs(est - 1) <= err


def test_dimensions():
    assert lattice.lattice_dimension(P23) == pytest.approx(1 + np.log(2) / np.log(3))
    for n in (1, 4):
        assert lattice.covering_dimension(P23, n) == pytest.approx(lattice.lattice_dimension(P23))
