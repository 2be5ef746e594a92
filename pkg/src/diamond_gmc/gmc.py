"""Hierarchical white noise and the finite-level GMC path measures M^(n)_beta.

The field is realized through cell averages ``xi_e = <W, b^k chi_e>`` for
level-k cells, which are centered Gaussians of variance (b/s)^k with
``xi_e = (1/b) sum of its children``.  Given a parent value the children are
drawn from the exact conditional law by a one-constraint Gaussian bridge.

Two sampling entry points exist.  :func:`sample_noise_tree` draws a single
tree whose level k comes from a stream keyed by ``(seed, k)``, so deepening a
tree never changes its shallower levels.  :func:`sample_noise_levels` draws a
batch of trees from one generator; the Monte Carlo drivers call it inside
keyed shards (see :mod:`diamond_gmc.rng`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import AddressError
from .hierarchy import compose_moments, log_reduce, log_root, pair_moment, triple_moment
from .intersection import mgf_phi
from .lattice import LatticeParams, decision_count
from .paths import CoarsePath, path_edge_matrix
from .rng import DEFAULT_SHARD, MeanEstimate, make_rng, run_sharded

# --- noise ------------------------------------------------------------------


def level_variance(params: LatticeParams, k: int) -> float:
    return (params.b / params.s) ** k


def bridge_children(params: LatticeParams, parent: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Children of ``parent`` (trailing axis = cells) from i.i.d. innovations ``eta``.

    ``eta`` has bs entries per parent cell; the result is
    ``eta + (xi_parent - mean_b(eta)) / s`` with mean_b = (1/b) * sum.
    """
    b, s, bs = params.b, params.s, params.bs
    eta = eta.reshape(parent.shape + (bs,))
    delta = eta.sum(axis=-1) / b
    child = eta + ((parent - delta) / s)[..., None]
    return child.reshape(parent.shape[:-1] + (parent.shape[-1] * bs,))


def sample_noise_levels(params: LatticeParams, n: int, count: int, rng: np.random.Generator,
                        start: Optional[Sequence[np.ndarray]] = None) -> list[np.ndarray]:
    """A batch of ``count`` trees: ``out[k]`` has shape (count, (bs)^k).

    If ``start`` holds levels 0..m of existing trees they are extended to depth n.
    """
    if start is None:
        levels = [rng.standard_normal((count, 1))]
    else:
        levels = [np.asarray(x) for x in start]
    for k in range(len(levels), n + 1):
        sd = math.sqrt(level_variance(params, k))
        eta = rng.standard_normal(levels[-1].shape[:-1] + (levels[-1].shape[-1] * params.bs,)) * sd
        levels.append(bridge_children(params, levels[-1], eta))
    return levels[: n + 1]


@dataclass(frozen=True, eq=False)
class NoiseTree:
    """Per-level arrays ``xi[k]`` over the level-k cells, k = 0..depth."""

    params: LatticeParams
    depth: int
    xi: tuple = field(repr=False)
    seed: Optional[int] = None

    def level(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.depth:
            raise AddressError(f"tree of depth {self.depth} has no level {k}")
        return self.xi[k]

    def truncate(self, n: int) -> "NoiseTree":
        if n > self.depth:
            raise AddressError(f"cannot truncate depth {self.depth} to {n}")
        return NoiseTree(self.params, n, self.xi[: n + 1], self.seed)

    def extend(self, n: int, rng: Optional[np.random.Generator] = None) -> "NoiseTree":
        """Deepen to level n; keyed trees continue their own per-level streams."""
        xi = list(self.xi)
        for k in range(self.depth + 1, n + 1):
            r = make_rng(self.seed, k) if rng is None else rng
            if rng is None and self.seed is None:
                raise ValueError("unseeded tree needs an explicit rng to extend")
            eta = r.standard_normal(xi[-1].size * self.params.bs) * math.sqrt(level_variance(self.params, k))
            xi.append(bridge_children(self.params, xi[-1], eta))
        return NoiseTree(self.params, max(n, self.depth), tuple(xi), self.seed)

    def consistency_residual(self) -> float:
        worst = 0.0
        b = self.params.b
        for k in range(self.depth):
            kids = self.xi[k + 1].reshape(-1, self.params.bs).sum(axis=1) / b
            worst = max(worst, float(np.max(np.abs(kids - self.xi[k]))))
        return worst


def sample_noise_tree(params: LatticeParams, n: int, seed: int) -> NoiseTree:
    tree = NoiseTree(params, 0, (make_rng(seed, 0).standard_normal(1),), seed)
    return tree.extend(n)


def pair_field(tree: NoiseTree, psi: np.ndarray, k: Optional[int] = None) -> float:
    """``<W, psi>`` for a level-k cell function psi: sum psi_e xi_e / b^k."""
    psi = np.asarray(psi, dtype=float).ravel()
    params = tree.params
    if k is None:
        k = round(math.log(psi.size) / math.log(params.bs)) if psi.size > 1 else 0
    xi = tree.level(k)
    if xi.shape[-1] != psi.size:
        raise AddressError(f"psi has {psi.size} entries, level {k} has {xi.shape[-1]}")
    return float(xi @ psi) / params.b**k


def pair_field_level(params: LatticeParams, xi_k: np.ndarray, psi: np.ndarray, k: int) -> np.ndarray:
    return np.asarray(xi_k) @ np.asarray(psi, dtype=float) / params.b**k


def psi_norm_squared(params: LatticeParams, psi: np.ndarray, k: int) -> float:
    """||psi||^2 in L^2(nu) for a level-k cell function."""
    return float(np.sum(np.asarray(psi, dtype=float) ** 2)) / params.bs**k


# --- weights and masses -------------------------------------------------------


def leaf_log_weights(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float) -> np.ndarray:
    return beta * np.asarray(xi_n) - 0.5 * beta**2 * level_variance(params, n)


def gmc_log_weight(tree: NoiseTree, p: CoarsePath, beta: float) -> float:
    """log dM^(n)/dmu at p: beta <W, Y_p> - (beta^2/2) ||Y_p||^2."""
    n = p.level
    if tree.depth < n:
        raise AddressError(f"tree depth {tree.depth} < path level {n}")
    xi = tree.level(n)[p.edge_indices()]
    return float(beta * xi.sum() - 0.5 * beta**2 * tree.params.s**n * level_variance(tree.params, n))


@dataclass(frozen=True)
class MassResult:
    total: float
    log_total: float
    cylinder_level: Optional[int] = None
    cylinders: Optional[np.ndarray] = field(default=None, repr=False)


def log_cell_masses(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float) -> list[np.ndarray]:
    """Per-level log Z(cell) arrays of the level-n GMC."""
    return log_reduce(params, leaf_log_weights(params, xi_n, n, beta))


def log_cylinder_masses(params: LatticeParams, log_levels: list[np.ndarray], m: int) -> np.ndarray:
    """log M(cylinder) for every level-m coarse path, in enumeration order.

    M([p]_m) = b^(-D_m) * prod over the cells e of [p]_m of Z(e).
    """
    edges = path_edge_matrix(params, m) if m else np.zeros((1, 1), dtype=np.int64)
    lz = log_levels[m]
    return lz[..., edges].sum(axis=-1) - decision_count(params, m) * math.log(params.b)


def total_mass(tree: NoiseTree, n: int, beta: float, cylinder_level: Optional[int] = None) -> MassResult:
    if tree.depth < n:
        raise AddressError(f"tree depth {tree.depth} < level {n}")
    levels = log_cell_masses(tree.params, tree.level(n), n, beta)
    lz = float(levels[0][0])
    cyl = None
    if cylinder_level is not None:
        if not 0 <= cylinder_level <= n:
            raise AddressError("cylinder level must lie in 0..n")
        cyl = np.exp(log_cylinder_masses(tree.params, levels, cylinder_level))
    return MassResult(math.exp(lz), lz, cylinder_level, cyl)


def cylinder_mass(tree: NoiseTree, m: int, path: CoarsePath, n: int, beta: float) -> float:
    if path.level != m or m > n:
        raise AddressError("cylinder path must have level m <= n")
    levels = log_cell_masses(tree.params, tree.level(n), n, beta)
    lz = levels[m][path.edge_indices()].sum() - decision_count(tree.params, m) * math.log(tree.params.b)
    return math.exp(lz)


def max_cylinder_share(tree: NoiseTree, n: int, m: int, beta: float) -> float:
    levels = log_cell_masses(tree.params, tree.level(n), n, beta)
    lc = log_cylinder_masses(tree.params, levels, m)
    return float(np.exp(lc.max() - levels[0][0]))


def batch_log_mass(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float) -> np.ndarray:
    return log_root(params, leaf_log_weights(params, xi_n, n, beta))


def batch_max_share(params: LatticeParams, xi_n: np.ndarray, n: int, m: int, beta: float) -> np.ndarray:
    levels = log_cell_masses(params, xi_n, n, beta)
    lc = log_cylinder_masses(params, levels, m)
    return np.exp(lc.max(axis=-1) - levels[0][..., 0])


# --- exact replica moments ----------------------------------------------------


def two_replica_moment(params: LatticeParams, n: int, beta: float) -> float:
    """E[Z_n^2] = u_n with u_0 = exp(beta^2 (b/s)^n)."""
    return pair_moment(params, n, math.expm1(beta**2 * level_variance(params, n)))


def three_replica_moment(params: LatticeParams, n: int, beta: float) -> float:
    """E[Z_n^3] by the joint (u, psi) recursion, psi_0 = exp(3 beta^2 (b/s)^n)."""
    v = beta**2 * level_variance(params, n)
    return triple_moment(params, n, math.expm1(v), math.expm1(3 * v))


def replica_moments(params: LatticeParams, n: int, beta: float) -> list[float]:
    return [1.0, 1.0, two_replica_moment(params, n, beta), three_replica_moment(params, n, beta)]


# --- Monte Carlo drivers ------------------------------------------------------


def sample_log_masses(params: LatticeParams, n: int, beta: float, trials: int, seed: int,
                      workers: int = 1, shard_size: int = DEFAULT_SHARD) -> np.ndarray:
    def shard(rng, count):
        levels = sample_noise_levels(params, n, count, rng)
        return batch_log_mass(params, levels[n], n, beta)

    return run_sharded(shard, trials, seed, key=(1, n), workers=workers, shard_size=shard_size)


def mc_mass_moments(params: LatticeParams, n: int, beta: float, trials: int, seed: int,
                    workers: int = 1) -> tuple[MeanEstimate, MeanEstimate]:
    z = np.exp(sample_log_masses(params, n, beta, trials, seed, workers))
    return MeanEstimate.of(z), MeanEstimate.of(z**2)


@dataclass(frozen=True)
class RefinementReport:
    mean_diff: MeanEstimate
    slope: float
    intercept: float
    trials: int


def refinement_martingale_check(params: LatticeParams, n: int, beta: float, trials: int, seed: int,
                                workers: int = 1) -> RefinementReport:
    """Z_{n+1} - Z_n over bridge refinements of fresh depth-n trees."""

    def shard(rng, count):
        levels = sample_noise_levels(params, n, count, rng)
        zn = np.exp(batch_log_mass(params, levels[n], n, beta))
        levels = sample_noise_levels(params, n + 1, count, rng, start=levels)
        zn1 = np.exp(batch_log_mass(params, levels[n + 1], n + 1, beta))
        return np.stack([zn, zn1], axis=1)

    out = run_sharded(shard, trials, seed, key=(2, n), workers=workers)
    slope, intercept = np.polyfit(out[:, 0], out[:, 1], 1)
    return RefinementReport(MeanEstimate.of(out[:, 1] - out[:, 0]), float(slope), float(intercept), trials)


def conditional_refinement_check(tree: NoiseTree, beta: float, inner: int, seed: int) -> tuple[float, MeanEstimate]:
    """For one fixed tree: (Z_n, MC mean of Z_{n+1} over refinements)."""
    params, n = tree.params, tree.depth
    zn = total_mass(tree, n, beta).total

    def shard(rng, count):
        start = [np.broadcast_to(x, (count, x.size)) for x in tree.xi]
        levels = sample_noise_levels(params, n + 1, count, rng, start=start)
        return np.exp(batch_log_mass(params, levels[n + 1], n + 1, beta))

    return zn, MeanEstimate.of(run_sharded(shard, inner, seed, key=(3, n)))


@dataclass(frozen=True)
class CompositionReport:
    rescaled: list
    composed: list
    max_abs_diff: float
    ks_pvalue: Optional[float] = None


def composition_check(params: LatticeParams, n: int, beta: float, samples: int = 0,
                      seed: int = 0, workers: int = 1) -> CompositionReport:
    """Level-(n+1) GMC at beta*sqrt(s/b) against (1/b) sum_i prod_j of bs level-n GMCs at beta."""
    beta_big = beta * math.sqrt(params.s / params.b)
    lhs = replica_moments(params, n + 1, beta_big)[1:]
    m = replica_moments(params, n, beta)
    rhs = [compose_moments(params, m, r) for r in (1, 2, 3)]
    diff = max(abs(a - c) / max(1.0, abs(a)) for a, c in zip(lhs, rhs))
    pval = None
    if samples:
        za = np.exp(sample_log_masses(params, n + 1, beta_big, samples, seed, workers))
        b, s = params.b, params.s

        def shard(rng, count):
            levels = sample_noise_levels(params, n, count * b * s, rng)
            lz = batch_log_mass(params, levels[n], n, beta).reshape(count, b, s)
            return np.exp(lz.sum(axis=-1)).sum(axis=-1) / b

        zb = run_sharded(shard, samples, seed, key=(4, n), workers=workers)
        pval = float(stats.ks_2samp(za, zb).pvalue)
    return CompositionReport(lhs, rhs, diff, pval)


def shift_exact(params: LatticeParams, n: int, beta: float, psi: np.ndarray, k: int) -> float:
    """int exp(beta <Y^(n)_p, psi>) mu(dp), via the sum-product recursion.

    <Y^(n)_p, psi> adds psi(anc_k(e)) / s^n over the level-n cells e of p.
    """
    psi = np.asarray(psi, dtype=float)
    if k > n:
        raise AddressError("psi level must not exceed n")
    leaf = beta * np.repeat(psi, params.bs ** (n - k)) / params.s**n
    return float(np.exp(log_root(params, leaf)))


@dataclass(frozen=True)
class ShiftReport:
    exact: float
    estimate: MeanEstimate


def shift_identity_check(params: LatticeParams, n: int, beta: float, psi: np.ndarray, k: int,
                         trials: int, seed: int, workers: int = 1) -> ShiftReport:
    """MC of E[Z_n exp(<W,psi> - ||psi||^2/2)] against :func:`shift_exact`."""
    psi = np.asarray(psi, dtype=float)
    norm2 = psi_norm_squared(params, psi, k)

    def shard(rng, count):
        levels = sample_noise_levels(params, n, count, rng)
        lz = batch_log_mass(params, levels[n], n, beta)
        return np.exp(lz + pair_field_level(params, levels[k], psi, k) - 0.5 * norm2)

    return ShiftReport(shift_exact(params, n, beta, psi, k),
                       MeanEstimate.of(run_sharded(shard, trials, seed, key=(5, n, k), workers=workers)))


def fractional_moment_mc(params: LatticeParams, n: int, beta: float, trials: int, seed: int,
                         workers: int = 1) -> MeanEstimate:
    """MC estimate of E[sqrt(Z_n)]; bounded by exp(-beta^2 / 8)."""
    return MeanEstimate.of(np.exp(0.5 * sample_log_masses(params, n, beta, trials, seed, workers)))


def fractional_bound(beta: float) -> float:
    return math.exp(-beta**2 / 8)


def localization_medians(params: LatticeParams, n: int, m: int, betas: Sequence[float], seeds: int,
                         seed: int, workers: int = 1) -> np.ndarray:
    """Median over trees of the largest level-m cylinder share, per beta.

    The same trees serve every beta.
    """
    betas = list(betas)

    def shard(rng, count):
        xi = sample_noise_levels(params, n, count, rng)[n]
        return np.stack([batch_max_share(params, xi, n, m, bt) for bt in betas], axis=1)

    shares = run_sharded(shard, seeds, seed, key=(6, n, m), workers=workers)
    return np.median(shares, axis=0)


# --- tilted intersection moment -----------------------------------------------


def tilted_intersection_moment(params: LatticeParams, n: int, beta: float, alpha: float) -> float:
    """E[int int exp(alpha m_n(p,q)) M(dp) M(dq)] = g_n(exp((alpha + beta^2)(b/s)^n))."""
    return mgf_phi(params, n, alpha + beta**2)


def tilted_pair_integral(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float, alpha: float) -> np.ndarray:
    """Per-tree value of int int exp(alpha m_n) M(dp) M(dq), exactly.

    Pairs of paths factor over the diamond: if both take branch i the pair
    continues jointly through the s sub-cells, otherwise the two replicas
    see independent branches.  With P the single-replica mass and Q the pair
    mass,  Q(c) = b^-2 [sum_i prod_j Q_ij + (sum_i X_i)^2 - sum_i X_i^2],
    X_i = prod_j P_ij, from leaves P = w and Q = w^2 exp(alpha (b/s)^n).
    """
    b, s = params.b, params.s
    w = np.exp(leaf_log_weights(params, xi_n, n, beta))
    P, Q = w, w**2 * math.exp(alpha * level_variance(params, n))
    while P.shape[-1] > 1:
        Pr = P.reshape(P.shape[:-1] + (-1, b, s)).prod(axis=-1)
        Qr = Q.reshape(Q.shape[:-1] + (-1, b, s)).prod(axis=-1)
        Q = (Qr.sum(axis=-1) + Pr.sum(axis=-1) ** 2 - (Pr**2).sum(axis=-1)) / b**2
        P = Pr.sum(axis=-1) / b
    return Q[..., 0]


def tilted_moment_mc(params: LatticeParams, n: int, beta: float, alpha: float, trials: int, seed: int,
                     workers: int = 1) -> MeanEstimate:
    def shard(rng, count):
        xi = sample_noise_levels(params, n, count, rng)[n]
        return tilted_pair_integral(params, xi, n, beta, alpha)

    return MeanEstimate.of(run_sharded(shard, trials, seed, key=(7, n), workers=workers))


def noise_level_stats(params: LatticeParams, n: int, trials: int, seed: int) -> list[MeanEstimate]:
    """Per-level MC estimates of Var(xi_e) (one cell per level, for the variance check)."""
    def shard(rng, count):
        levels = sample_noise_levels(params, n, count, rng)
        return np.stack([lv[:, 0] ** 2 for lv in levels], axis=1)

    sq = run_sharded(shard, trials, seed, key=(8, n))
    return [MeanEstimate.of(sq[:, k]) for k in range(n + 1)]
