import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from diamond_gmc import lattice, paths
from diamond_gmc.errors import AddressError, CapExceededError, EmptySupportError
from diamond_gmc.lattice import EdgeAddress, LatticeParams
from diamond_gmc.paths import CellSet, CoarsePath
from diamond_gmc.rng import make_rng

P23 = LatticeParams(2, 3)


def all_paths(params, n):
    return [CoarsePath(params, n, c) for c in paths.enumerate_paths(params, n)]


def path_cells(params, p):
    """Oracle: the level-n cells of a path, built by recursive substitution."""
    out = [()]
    for d in range(p.level):
        choice = iter(p.levels()[d])
        nxt = []
        for word in out:
            i = int(next(choice))
            nxt.extend(word + ((i, j),) for j in range(1, params.s + 1))
        out = nxt
    return [EdgeAddress(w) for w in out]


@pytest.mark.parametrize("params", [LatticeParams(2, 3), LatticeParams(3, 2), LatticeParams(2, 4)])
def test_enumeration(params):
    for n in range(3):
        ps = all_paths(params, n)
        assert len(ps) == lattice.path_count(params, n)
        assert len(set(ps)) == len(ps)
        assert [p.index() for p in ps] == list(range(len(ps)))


def test_edges_match_substitution_oracle():
    for params in (P23, LatticeParams(3, 2)):
        for p in all_paths(params, 2):
            oracle = path_cells(params, p)
            assert p.edges() == oracle
            assert p.edge_indices().tolist() == [lattice.edge_index(params, e) for e in oracle]


def test_edges_are_connected_chain():
    for p in all_paths(P23, 2):
        es = p.edges()
        assert lattice.edge_endpoints(P23, es[0])[0] == lattice.VERTEX_A
        assert lattice.edge_endpoints(P23, es[-1])[1] == lattice.VERTEX_B
        for a, b in zip(es, es[1:]):
            assert lattice.edge_endpoints(P23, a)[1] == lattice.edge_endpoints(P23, b)[0]


def test_parse_roundtrip_and_validation():
    p = CoarsePath.parse(P23, 2, "1211")
    assert str(p) == "1211" and CoarsePath.parse(P23, 2, str(p)) == p
    assert str(CoarsePath(P23, 0, [])) == "-"
    with pytest.raises(AddressError):
        CoarsePath.parse(P23, 2, "121")
    with pytest.raises(AddressError):
        CoarsePath.parse(P23, 1, "3")


def test_shared_bonds_brute_force():
    for params, n in ((P23, 1), (P23, 2), (LatticeParams(3, 2), 2)):
        ps = all_paths(params, n)
        cells = {p: set(p.edge_indices().tolist()) for p in ps}
        for p, q in itertools.product(ps, repeat=2):
            assert paths.shared_bonds(p, q) == len(cells[p] & cells[q])
        cm = np.array([p.choices for p in ps])
        batch = paths.shared_bonds_batch(params, n, cm[:, None, :], cm[None, :, :])
        ref = np.array([[len(cells[p] & cells[q]) for q in ps] for p in ps])
        np.testing.assert_array_equal(batch, ref)


def test_edge_at_and_coarsen():
    rng = make_rng(5)
    for _ in range(20):
        p = paths.sample_uniform_path(P23, 3, rng)
        es = p.edges()
        assert [paths.edge_at(p, k) for k in range(1, len(es) + 1)] == es
        q = paths.coarsen(p, 1)
        assert {e.ancestor(1) for e in es} == set(q.edges())
        r = paths.refine(q, 3, rng)
        assert paths.coarsen(r, 1) == q
    with pytest.raises(AddressError):
        paths.edge_at(p, 0)


def test_uniform_sampler_is_uniform():
    rng = make_rng(6)
    counts = Counter(paths.sample_uniform_path(P23, 2, rng).index() for _ in range(16000))
    obs = [counts[i] for i in range(16)]
    assert stats.chisquare(obs).pvalue > 1e-3


def test_level_cap():
    with pytest.raises(CapExceededError):
        paths.sample_uniform_path(P23, 13, make_rng(0))
    long = paths.sample_uniform_path(P23, 13, make_rng(0), max_level=None)
    assert long.choices.size == lattice.decision_count(P23, 13)


def test_cellset_rejects_duplicates():
    e = EdgeAddress(((1, 1),))
    with pytest.raises(AddressError):
        CellSet.of(1, [e, e])


cell_sets = st.lists(st.integers(0, 35), min_size=1, max_size=4, unique=True)


@settings(max_examples=80, deadline=None)
@given(cell_sets)
def test_count_through_brute_force(idx):
    S = CellSet.of(2, [lattice.edge_from_index(P23, 2, i) for i in idx])
    ps = all_paths(P23, 2)
    oracle = sum(paths.contains_cells(p, S) for p in ps)
    assert paths.count_paths_through(P23, S) == oracle
    forced = paths.forced_choices(P23, S)
    assert (forced is None) == (oracle == 0)
    if oracle:
        assert paths.contains_cells(paths.sample_path_through(P23, S, make_rng(7, *idx)), S)
    else:
        with pytest.raises(EmptySupportError):
            paths.sample_path_through(P23, S, make_rng(7))


def test_conditioned_sampler_uniform_on_support():
    S = CellSet.of(2, [EdgeAddress(((1, 2), (2, 1)))])
    support = [p for p in all_paths(P23, 2) if paths.contains_cells(p, S)]
    rng = make_rng(8)
    counts = Counter(paths.sample_path_through(P23, S, rng) for _ in range(4000))
    assert set(counts) == set(support)
    assert stats.chisquare([counts[p] for p in support]).pvalue > 1e-3
