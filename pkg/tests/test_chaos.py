import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e

from diamond_gmc import chaos, gmc, lattice, paths
from diamond_gmc.chaos import PathEvent, RhoQuery
from diamond_gmc.errors import AddressError
from diamond_gmc.lattice import EdgeAddress, LatticeParams
from diamond_gmc.paths import CellSet, CoarsePath
from diamond_gmc.rng import MeanEstimate, make_rng

P23 = LatticeParams(2, 3)


def cells(level, *idx):
    return CellSet.of(level, [lattice.edge_from_index(P23, level, i) for i in idx])


def brute_through(S, A):
    """Oracle: (# paths through S with [p]_m in A, # paths through S), by enumeration."""
    n, m = S.level, A.level
    hit = inside = 0
    for c in paths.enumerate_paths(P23, n):
        p = CoarsePath(P23, n, c)
        if paths.contains_cells(p, S):
            hit += 1
            inside += paths.coarsen(p, m).index() in A.indices
    return inside, hit


def test_gamma_hand_cases():
    assert chaos.gamma(cells(2, 0)).value == 0
    # different top-level branches: coalesce only at level 0
    S = CellSet.of(2, [EdgeAddress(((1, 1), (1, 1))), EdgeAddress(((2, 1), (1, 1)))])
    assert chaos.gamma(S).terms == (1,)
    # same level-1 cell: together at levels 0 and 1
    S = CellSet.of(2, [EdgeAddress(((1, 1), (1, 1))), EdgeAddress(((1, 1), (2, 3)))])
    g = chaos.gamma(S)
    assert g.value == 2 and g.stabilization == 2
    S = CellSet.of(2, [EdgeAddress(((1, 1), (1, 1))), EdgeAddress(((1, 1), (2, 3))), EdgeAddress(((1, 2), (1, 1)))])
    assert chaos.gamma(S).terms == (2, 1)


cell_sets = st.lists(st.integers(0, 35), min_size=1, max_size=3, unique=True)
events = st.one_of(
    st.just(PathEvent.everything(P23, 0)),
    st.integers(0, 1).map(lambda i: PathEvent(P23, 1, (i,))),
    st.lists(st.integers(0, 15), min_size=1, max_size=5).map(lambda ix: PathEvent(P23, 2, tuple(ix))),
)


@settings(max_examples=120, deadline=None)
@given(cell_sets, events)
def test_rho_equals_integrated_density(idx, A):
    # b^gamma(S) mu_S(A) = int_A b^(nk) 1[S on p] mu(dp) = b^(nk) mu(A and G_S)
    S = cells(2, *idx)
    inside, hit = brute_through(S, A)
    mu_cap = Fraction(inside, lattice.path_count(P23, 2))
    assert chaos.mu_intersection(P23, S, A) == mu_cap
    rho = chaos.rho_measure(RhoQuery(S, A))
    assert rho == P23.b ** (2 * len(S)) * mu_cap
    if hit:
        assert rho == P23.b ** chaos.gamma(S).value * Fraction(inside, hit)


def test_rho_density_pointwise():
    S = cells(2, 0, 4)
    q = RhoQuery(S, PathEvent.everything(P23, 0))
    for c in paths.enumerate_paths(P23, 2):
        p = CoarsePath(P23, 2, c)
        assert chaos.rho_density(q, p) == (2**4 if paths.contains_cells(p, S) else 0)
    with pytest.raises(AddressError):
        chaos.rho_density(q, CoarsePath(P23, 1, [1]))


def test_count_through_in_partitions_count():
    rng = make_rng(1)
    for _ in range(30):
        S = cells(3, *rng.choice(216, size=2, replace=False))
        per = [chaos.count_through_in(P23, S, a) for a in PathEvent.everything(P23, 2).paths()]
        assert sum(per) == paths.count_paths_through(P23, S)


def test_event_validation():
    with pytest.raises(AddressError):
        PathEvent(P23, 1, (2,))
    with pytest.raises(AddressError):
        RhoQuery(cells(1, 0), PathEvent(P23, 2, (0,)))
    assert PathEvent(P23, 2, (3, 3, 1)).indices == (1, 3)
    assert PathEvent.everything(P23, 2).measure() == 1


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("n", [1, 2])
def test_consistency_identities(k, n):
    for A in (PathEvent.everything(P23, 0), PathEvent(P23, 1, (1,)), PathEvent(P23, n, (0,))):
        rep = chaos.consistency_check(P23, k, n, A)
        assert rep.passed and rep.marginal_residual == 0 and rep.total_mass_residual == 0
        if k >= 2:
            assert rep.coincident_mass > 0


def test_rho_table_matches_rho_measure_on_distinct_tuples():
    n, A = 2, PathEvent(P23, 1, (0,))
    table = chaos.rho_table(P23, n, A, 2)
    scale = P23.b ** lattice.decision_count(P23, A.level)
    for i, j in [(0, 1), (0, 7), (3, 30), (10, 11)]:
        exact = chaos.rho_measure(RhoQuery(cells(n, i, j), A))
        assert Fraction(int(table[i, j]), scale) == exact


def test_hermite_against_numpy():
    x = np.linspace(-3, 3, 13)
    for m in range(8):
        coef = np.zeros(m + 1)
        coef[m] = 1
        np.testing.assert_allclose(chaos.hermite_prob(m, x), hermite_e.hermeval(x, coef), atol=1e-10)


def test_chaos_terms_structure():
    xi = gmc.sample_noise_levels(P23, 2, 5, make_rng(2))[2]
    A = PathEvent(P23, 1, (1,))
    T = chaos.chaos_terms(P23, xi, 2, 0.6, A, 4)
    assert T.shape == (5, 5)
    np.testing.assert_allclose(T[:, 0], 0.5)  # order 0 is mu(A)


@pytest.mark.parametrize("A", [PathEvent.everything(P23, 0), PathEvent(P23, 2, (2, 9))])
def test_partial_sums_converge_to_mass(A):
    tree = gmc.sample_noise_tree(P23, 2, 3)
    exact = float(chaos.exact_event_mass(P23, tree.level(2), 2, 0.5, A)[0])
    errs = [abs(chaos.chaos_partial_sum(tree, 2, 0.5, A, K) - exact) for K in (2, 6, 14)]
    assert errs[-1] < 1e-5 and errs[-1] < errs[0]


def test_exact_event_mass_additive():
    xi = gmc.sample_noise_levels(P23, 2, 4, make_rng(4))[2]
    whole = chaos.exact_event_mass(P23, xi, 2, 0.9, PathEvent.everything(P23, 2))
    np.testing.assert_allclose(whole, np.exp(gmc.batch_log_mass(P23, xi, 2, 0.9)), rtol=1e-12)


def test_truncation_variance_exact_relations():
    for n in (1, 2, 3):
        beta = 0.4
        t = [chaos.truncation_variance_exact(P23, n, beta, K) for K in range(6)]
        var = chaos.chaos_variances_exact(P23, n, beta, 6)
        # K = 0 leaves Var(Z) = E[Z^2] - 1
        assert t[0] == pytest.approx(gmc.two_replica_moment(P23, n, beta) - 1, rel=1e-10)
        for K in range(1, 6):
            assert t[K] == pytest.approx(t[K - 1] - var[K], rel=1e-8, abs=1e-16)
        assert var[0] == pytest.approx(1.0)


def test_exp_tail_branches_agree():
    for K in range(5):
        lo, hi = chaos._exp_tail(5.0, K), chaos._exp_tail(5.0 + 1e-12, K)
        assert lo == pytest.approx(hi, rel=1e-9)
        assert chaos._exp_tail(0.3, K) == pytest.approx(
            math.exp(0.3) - sum(0.3**j / math.factorial(j) for j in range(K + 1)), rel=1e-9)


def test_chaos_orders_mean_zero_and_variances():
    n, beta, K = 1, 0.5, 3
    xi = gmc.sample_noise_levels(P23, n, 40000, make_rng(5))[n]
    T = chaos.chaos_terms(P23, xi, n, beta, PathEvent.everything(P23, 0), K)
    var = chaos.chaos_variances_exact(P23, n, beta, K)
    for k in range(1, K + 1):
        assert MeanEstimate.of(T[:, k]).within(0.0, k=4)
        assert MeanEstimate.of(T[:, k] ** 2).within(var[k], k=4)


@pytest.mark.slow
def test_truncation_variance_mc():
    n, beta = 1, 0.3
    xi = gmc.sample_noise_levels(P23, n, 10**4, make_rng(15, 0))[n]
    A = PathEvent.everything(P23, 0)
    z = chaos.exact_event_mass(P23, xi, n, beta, A)
    T = chaos.chaos_terms(P23, xi, n, beta, A, 3)
    for K in range(4):
        mse = MeanEstimate.of((z - T[:, : K + 1].sum(axis=1)) ** 2)
        assert mse.within(chaos.truncation_variance_exact(P23, n, beta, K))
