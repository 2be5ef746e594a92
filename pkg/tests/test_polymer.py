import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from diamond_gmc import gmc, intersection, paths, polymer
from diamond_gmc.lattice import LatticeParams
from diamond_gmc.polymer import WeightDistribution

P23 = LatticeParams(2, 3)
GAUSS, RAD, UNIF = (WeightDistribution(k) for k in ("gaussian", "rademacher", "uniform"))


def mgf_quadrature(kind, beta):
    if kind == "gaussian":
        f = lambda w: math.exp(beta * w - 0.5 * w * w) / math.sqrt(2 * math.pi)
        return integrate.quad(f, -40, 40, points=[beta])[0]
    if kind == "uniform":
        a = math.sqrt(3)
        return integrate.quad(lambda w: math.exp(beta * w) / (2 * a), -a, a)[0]
    return 0.5 * (math.exp(beta) + math.exp(-beta))


@pytest.mark.parametrize("kind", polymer.KINDS)
@pytest.mark.parametrize("beta", [1e-4, 0.3, 1.0, 4.0])
def test_mgf_against_quadrature(kind, beta):
    assert WeightDistribution(kind).mgf(beta) == pytest.approx(mgf_quadrature(kind, beta), rel=1e-10)


@given(st.floats(-700, 700))
def test_log_mgf_stable(beta):
    for d in (RAD, UNIF):
        v = d.log_mgf(beta)
        assert math.isfinite(v) and v >= 0
        assert v <= 0.5 * beta * beta * (1 + 1e-12) + 1e-300  # sub-Gaussian laws


def test_log_mgf_small_argument_precision():
    # the expansions must keep relative accuracy where naive log(cosh) loses it
    b = 1e-6
    assert RAD.log_mgf(b) == pytest.approx(b * b / 2 - b**4 / 12, rel=1e-12)
    assert UNIF.log_mgf(b) == pytest.approx(3 * b * b / 6, rel=1e-10)


@pytest.mark.parametrize("kind", polymer.KINDS)
def test_samples_are_standardized(kind):
    w = WeightDistribution(kind).sample(200000, np.random.default_rng(1))
    assert abs(w.mean()) < 0.01 and abs(w.var() - 1) < 0.01


def test_unknown_distribution():
    with pytest.raises(ValueError):
        WeightDistribution("cauchy")


def test_partition_function_enumeration():
    n, beta = 2, 0.8
    for d in (GAUSS, RAD, UNIF):
        env = polymer.sample_environment(P23, n, d, seed=4)
        edges = paths.path_edge_matrix(P23, n)
        per_path = np.exp(beta * env.omega[edges] - d.log_mgf(beta)).prod(axis=1)
        assert polymer.partition_function(env, beta) == pytest.approx(per_path.mean(), rel=1e-12)


def test_environment_cap():
    with pytest.raises(ValueError):
        polymer.sample_environment(P23, 9, GAUSS, seed=0)


@pytest.mark.parametrize("dist", [GAUSS, RAD, UNIF])
def test_second_moment_is_pgf_at_lambda2(dist):
    # E[Z^2] = E[lambda_2^N] = g_n(lambda_2)
    for n in range(5):
        beta = 0.7
        lam2 = math.exp(dist.log_lambda(2, beta))
        g = intersection.intersection_pgf(P23, n)
        assert polymer.replica_moment_exact(P23, n, dist, beta, 2) == pytest.approx(g(lam2), rel=1e-12)


def test_third_moment_by_enumeration():
    n, beta = 2, 0.5
    cm = paths.enumerate_paths(P23, n)
    N = paths.shared_bonds_batch(P23, n, cm[:, None, :], cm[None, :, :])
    for d in (RAD, UNIF):
        l2, l3 = math.exp(d.log_lambda(2, beta)), math.exp(d.log_lambda(3, beta))
        # each bond shared by all three replicas gets lambda_3, shared by exactly two gets lambda_2
        edges = paths.path_edge_matrix(P23, n)
        inc = np.zeros((len(cm), 36), dtype=int)
        np.put_along_axis(inc, edges, 1, axis=1)
        triple = np.einsum("pe,qe,re->pqr", inc, inc, inc)
        pair = N[:, :, None] + N[:, None, :] + N[None, :, :] - 3 * triple
        ref = np.mean(l2**pair * l3**triple)
        assert polymer.replica_moment_exact(P23, n, d, beta, 3) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        polymer.replica_moment_exact(P23, n, RAD, beta, 4)


def test_gaussian_polymer_equals_gmc():
    for n in range(31):
        bn = polymer.intermediate_disorder_beta(P23, n, 1.0)
        a = polymer.replica_moment_exact(P23, n, GAUSS, bn, 2)
        c = gmc.two_replica_moment(P23, n, 1.0)
        assert a == pytest.approx(c, rel=1e-12)
        a3 = polymer.replica_moment_exact(P23, n, GAUSS, bn, 3)
        assert a3 == pytest.approx(gmc.three_replica_moment(P23, n, 1.0), rel=1e-12)


def test_rademacher_error_decreasing():
    limit = intersection.mgf_phi_limit(P23, 1.0)
    errs = [abs(polymer.replica_moment_exact(P23, n, RAD, polymer.intermediate_disorder_beta(P23, n, 1.0), 2)
                - limit) for n in range(61)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # the error contracts by about b/s per level
    assert errs[50] / errs[49] == pytest.approx(2 / 3, rel=0.01)


def test_convergence_experiment_rows():
    rows = polymer.convergence_experiment(P23, 1.0, UNIF, [0, 5, 20, 30], mc_trials=2000, seed=3)
    assert [r.n for r in rows] == [0, 5, 20, 30]
    assert rows[0].cylinder_mean is None and rows[2].cylinder_mean is None
    assert rows[2].err_m2 > rows[3].err_m2 and rows[2].limit_err_m2 > rows[3].limit_err_m2
    r5 = rows[1]
    # the first level-1 cylinder has mean mass mu = 1/b
    assert abs(r5.cylinder_mean - 0.5) <= 3 * r5.cylinder_se


def test_polymer_mc_mean():
    bn = polymer.intermediate_disorder_beta(P23, 3, 1.0)
    z = np.exp(polymer.sample_log_partition(P23, 3, RAD, bn, 20000, seed=5))
    assert abs(z.mean() - 1) <= 3 * z.std(ddof=1) / math.sqrt(z.size)
    shares = polymer.sample_cylinder_shares(P23, 3, RAD, bn, 20000, seed=5)
    assert shares.shape == (20000, 2) and np.all(shares > 0)
    tot = shares.sum(axis=1)
    assert abs(tot.mean() - 1) <= 3 * tot.std(ddof=1) / math.sqrt(tot.size)
