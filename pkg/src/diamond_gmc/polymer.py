"""Discrete directed polymers on D_n with i.i.d. edge weights.

The normalized partition function is the mu-average over paths of
``prod_k exp(beta w_e) / Lambda(beta)``, computed by the same sum-product
recursion as the GMC.  Under the intermediate-disorder scaling
``beta_n = beta (b/s)^(n/2)`` its replica moments converge to those of the
GMC at inverse temperature beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gmc import log_cylinder_masses, three_replica_moment, two_replica_moment
from .hierarchy import log_reduce, log_root, pair_moment, triple_moment
from .intersection import mgf_phi_limit
from .lattice import LatticeParams, edge_count
from .rng import MeanEstimate, make_rng, run_sharded

KINDS = ("gaussian", "rademacher", "uniform")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
_SQRT3 = math.sqrt(3.0)


def _log_cosh(x: float) -> float:
    x = abs(x)
    if x < 1.0:
        # cosh x = 1 + 2 sinh^2(x/2) keeps relative precision near 0
        return math.log1p(2.0 * math.sinh(0.5 * x) ** 2)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _log_sinhc(x: float) -> float:
    """log(sinh(x)/x)."""
    x = abs(x)
    if x < 1e-2:
        x2 = x * x
        return x2 / 6.0 - x2 * x2 / 180.0 + x2**3 / 2835.0
    if x < 20.0:
        return math.log(math.sinh(x) / x)
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0) - math.log(x)


@dataclass(frozen=True)
class WeightDistribution:
    """Mean-zero, unit-variance weight law with closed-form MGF."""

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight distribution {self.kind!r}; choose from {KINDS}")

    def log_mgf(self, beta: float) -> float:
        """log Lambda(beta) = log E[exp(beta w)]."""
        if self.kind == "gaussian":
            return 0.5 * beta * beta
        if self.kind == "rademacher":
            return _log_cosh(beta)
        return _log_sinhc(_SQRT3 * beta)

    def mgf(self, beta: float) -> float:
        return math.exp(self.log_mgf(beta))

    def log_lambda(self, m: int, beta: float) -> float:
        """log lambda_m(beta) = log Lambda(m beta) - m log Lambda(beta)."""
        return self.log_mgf(m * beta) - m * self.log_mgf(beta)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=size)


@dataclass(frozen=True, eq=False)
class Environment:
    params: LatticeParams
    level: int
    omega: np.ndarray = field(repr=False)
    seed: Optional[int]
    dist: WeightDistribution


def sample_environment(params: LatticeParams, n: int, dist: WeightDistribution, seed: int,
                       max_level: int = 8) -> Environment:
    if n > max_level:
        raise ValueError(f"environment level {n} exceeds cap {max_level}")
    rng = make_rng(seed, 9, n, _KIND_CODE[dist.kind])
    return Environment(params, n, dist.sample(edge_count(params, n), rng), seed, dist)


def partition_function(env: Environment, beta: float) -> float:
    """Normalized partition function, via the log-domain sum-product recursion."""
    return math.exp(log_partition_function(env, beta))


def log_partition_function(env: Environment, beta: float) -> float:
    leaf = beta * env.omega - env.dist.log_mgf(beta)
    return float(log_root(env.params, leaf))


def intermediate_disorder_beta(params: LatticeParams, n: int, beta: float) -> float:
    params.require_gmc()
    return beta * (params.b / params.s) ** (n / 2)


def replica_moment_exact(params: LatticeParams, n: int, dist: WeightDistribution, beta: float, m: int) -> float:
    """E[Z_n^m] for m in {2, 3} at inverse temperature ``beta`` (not rescaled)."""
    if m == 2:
        return pair_moment(params, n, math.expm1(dist.log_lambda(2, beta)))
    if m == 3:
        return triple_moment(params, n, math.expm1(dist.log_lambda(2, beta)), math.expm1(dist.log_lambda(3, beta)))
    raise ValueError("replica order must be 2 or 3")


def sample_log_partition(params: LatticeParams, n: int, dist: WeightDistribution, beta: float,
                         trials: int, seed: int, workers: int = 1) -> np.ndarray:
    lmgf = dist.log_mgf(beta)
    E = edge_count(params, n)

    def shard(rng, count):
        return log_root(params, beta * dist.sample((count, E), rng) - lmgf)

    return run_sharded(shard, trials, seed, key=(10, n, _KIND_CODE[dist.kind]), workers=workers)


def sample_cylinder_shares(params: LatticeParams, n: int, dist: WeightDistribution, beta: float,
                           trials: int, seed: int, level: int = 1, workers: int = 1) -> np.ndarray:
    """Level-``level`` cylinder masses of the polymer measure, shape (trials, |Gamma_level|)."""
    lmgf = dist.log_mgf(beta)
    E = edge_count(params, n)

    def shard(rng, count):
        levels = log_reduce(params, beta * dist.sample((count, E), rng) - lmgf)
        return np.exp(log_cylinder_masses(params, levels, level))

    return run_sharded(shard, trials, seed, key=(11, n, level, _KIND_CODE[dist.kind]), workers=workers)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    beta_n: float
    exact_m2: float
    exact_m3: float
    gmc_m2: float
    gmc_m3: float
    err_m2: float
    err_m3: float
    limit_err_m2: float
    cylinder_mean: Optional[float] = None
    cylinder_se: Optional[float] = None


def convergence_experiment(params: LatticeParams, beta: float, dist: WeightDistribution, n_list: Sequence[int],
                           mc_trials: int = 0, seed: int = 0, workers: int = 1,
                           cylinder_level: int = 1) -> list[ConvergenceRow]:
    """Replica moments of the polymer at beta_n against level-n GMC and the limit.

    ``err_m*`` compare with the level-n GMC at beta; ``limit_err_m2`` compares
    with phi_inf(beta^2), the n -> infinity GMC second moment.  With
    ``mc_trials`` the first level-``cylinder_level`` cylinder's mean mass is
    estimated by Monte Carlo (its exact value is that cylinder's mu-mass).
    """
    params.require_gmc()
    limit = mgf_phi_limit(params, beta**2)
    rows = []
    for n in n_list:
        bn = intermediate_disorder_beta(params, n, beta)
        m2 = replica_moment_exact(params, n, dist, bn, 2)
        m3 = replica_moment_exact(params, n, dist, bn, 3)
        g2 = two_replica_moment(params, n, beta)
        g3 = three_replica_moment(params, n, beta)
        cm = cse = None
        if mc_trials and n <= 6 and n >= cylinder_level:
            shares = sample_cylinder_shares(params, n, dist, bn, mc_trials, seed, cylinder_level, workers)
            est = MeanEstimate.of(shares[:, 0])
            cm, cse = est.mean, est.se
        rows.append(ConvergenceRow(n, bn, m2, m3, g2, g3, abs(m2 - g2), abs(m3 - g3), abs(m2 - limit), cm, cse))
    return rows
