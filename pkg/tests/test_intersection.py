import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from diamond_gmc import intersection, paths
from diamond_gmc.errors import CapExceededError, DivergenceError, RangeError, RegimeError
from diamond_gmc.lattice import LatticeParams
from diamond_gmc.rng import make_rng

P23 = LatticeParams(2, 3)


def enumerated_law(params, n):
    """Oracle: law of N(p, q) by enumeration, fixing p (the law does not depend on p)."""
    cm = paths.enumerate_paths(params, n)
    counts = paths.shared_bonds_batch(params, n, cm[:1], cm)
    tally = Counter(counts.tolist())
    return {k: Fraction(v, len(cm)) for k, v in tally.items()}


def test_g2_values():
    g = intersection.intersection_pgf(P23, 2)
    assert g.prob(0) == Fraction(9, 16)
    assert g.prob(3) == Fraction(3, 16)
    assert g.total() == 1


@pytest.mark.parametrize("params,n", [(P23, 1), (P23, 2), (P23, 3), (LatticeParams(3, 2), 2),
                                      (LatticeParams(2, 4), 2), (LatticeParams(3, 4), 2)])
def test_pgf_matches_enumeration(params, n):
    g = intersection.intersection_pgf(params, n)
    law = enumerated_law(params, n)
    assert {k: g.prob(k) for k in g.support().tolist()} == law
    assert all(g.prob(k) == 0 for k in range(g.degree + 1) if k not in law)


def test_pgf_fixed_p_symmetry():
    # the law of N(p, .) is the same for every p, so using p = first path is sound
    cm = paths.enumerate_paths(P23, 2)
    laws = {tuple(sorted(Counter(paths.shared_bonds_batch(P23, 2, cm[i:i + 1], cm).tolist()).items()))
            for i in range(len(cm))}
    assert len(laws) == 1


@pytest.mark.parametrize("n", range(9))
def test_martingale_mean(n):
    g = intersection.intersection_pgf(P23, n)
    assert g.derivative_at_one() * Fraction(2, 3) ** n == 1
    assert intersection.pgf_derivative_at_one(P23, n) == g.derivative_at_one()


def test_pgf_stride_and_degree():
    for n in range(1, 6):
        g = intersection.intersection_pgf(P23, n)
        assert g.degree == 3**n
        assert all(k % 3 == 0 for k in g.support().tolist())
        assert all(c >= 0 for c in g.coefficients)


def test_pgf_cap():
    with pytest.raises(CapExceededError):
        intersection.intersection_pgf(P23, 12, max_degree=10**4)


def test_pgf_call_overflow():
    g = intersection.intersection_pgf(P23, 6)
    assert g(1.0) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(RangeError):
        g(1e10)
    assert math.isfinite(g.log_eval(500.0))


def test_exact_moments_from_pgf():
    for n in range(6):
        g = intersection.intersection_pgf(P23, n)
        r = Fraction(2, 3) ** n
        # E[m_n^2] = r^2 (g''(1) + g'(1))
        direct = r**2 * (g.factorial_moment(2) + g.factorial_moment(1))
        assert intersection.moments_mn(P23, n, 2) == [1, direct]
        assert intersection.second_moment_sequence(P23, n, exact=True)[-1] == direct


def test_second_moment_limit():
    v = intersection.second_moment_sequence(P23, 60)
    assert v[0] == 1 and v[-1] == pytest.approx(4.0, abs=1e-9)
    assert intersection.second_moment_limit(P23) == 4
    assert intersection.second_moment_limit(LatticeParams(3, 5)) == Fraction(12, 2)
    with pytest.raises(RegimeError):
        intersection.second_moment_limit(LatticeParams(3, 3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.floats(-5.0, 2.0))
def test_mgf_matches_pgf(n, t):
    g = intersection.intersection_pgf(P23, n)
    z = math.exp(t * (2 / 3) ** n)
    assert intersection.mgf_phi(P23, n, t) == pytest.approx(g(z), rel=1e-12)


def test_mgf_known_values():
    assert intersection.mgf_phi(P23, 1, 1.0) == pytest.approx(0.5 + 0.5 * math.exp(2.0), rel=1e-14)
    assert intersection.mgf_phi(P23, 5, 0.0) == 1.0
    assert intersection.mgf_phi_limit(P23, 1.0) == pytest.approx(521.14671995, rel=1e-8)


def test_mgf_limit_extinction_asymptote():
    # as t -> -inf, phi_inf(t) -> P(N eventually 0) = 1 - p
    p = intersection.extinction_probability(P23)
    assert intersection.mgf_phi_limit(P23, -1e6) == pytest.approx(1 - p, abs=1e-9)


def test_mgf_limit_diverges():
    with pytest.raises(DivergenceError):
        intersection.mgf_phi_limit(P23, 50.0)


def test_extinction_closed_form():
    assert abs(intersection.extinction_probability(P23) - (3 - math.sqrt(5)) / 2) <= 1e-12


@pytest.mark.parametrize("b,s", [(2, 3), (2, 4), (3, 5), (2, 7)])
def test_extinction_root_oracle(b, s):
    params = LatticeParams(b, s)
    f = lambda x: x - (1 - (1 - x) ** s) / b
    root = optimize.brentq(f, 1e-9, 1 - 1e-12, xtol=1e-15)
    assert intersection.extinction_probability(params) == pytest.approx(root, abs=1e-12)


def test_offspring_law():
    law = intersection.offspring_law(P23)
    assert law.sum() == pytest.approx(1.0, abs=1e-15)
    # 1 - (1-p)^s = b p at the fixed point, so the truncated mean is exactly s/b
    mean = float(np.arange(1, 4) @ law)
    assert mean == pytest.approx(1.5, rel=1e-12)


def test_hausdorff_exponent():
    assert intersection.hausdorff_exponent(P23) == pytest.approx((math.log(3) - math.log(2)) / math.log(3))


@pytest.mark.slow
def test_dimension_estimator():
    est = intersection.estimate_dimension_mc(P23, 12, 10**4, make_rng(99))
    assert abs(est.estimate - intersection.hausdorff_exponent(P23)) < 0.02
    assert est.se < 0.01


def test_dimension_estimator_deterministic():
    a = intersection.estimate_dimension_mc(P23, 8, 500, make_rng(1))
    b = intersection.estimate_dimension_mc(P23, 8, 500, make_rng(1))
    assert a.estimate == b.estimate


def test_survival_chain_counts_grow_like_s_over_b():
    rng = make_rng(4)
    traj = intersection.simulate_survival_conditioned(P23, 6, rng, 2000)
    ratios = traj[:, 1:].mean(axis=0) / traj[:, :-1].mean(axis=0)
    assert np.all(traj[:, 0] == 1) and np.all(traj >= 1)
    assert np.all(np.abs(ratios - 1.5) < 0.1)
