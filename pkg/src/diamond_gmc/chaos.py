"""Chaos-expansion layer: gamma(S), the densities rho_k, their consistency
identities, and truncated expansions of the GMC mass.

Points x_1..x_k are represented by level-n cells.  For distinct cells
``rho_k(S; A) = b^gamma(S) mu_S(A)``.  Path events A are sets of level-m
coarse paths (:class:`PathEvent`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import AddressError, CapExceededError
from .gmc import NoiseTree, leaf_log_weights, level_variance, log_cylinder_masses
from .hierarchy import log_reduce
from .intersection import intersection_pgf
from .lattice import LatticeParams, decision_count, edge_count, letter_arrays, path_count
from .paths import CellSet, CoarsePath, contains_cells, enumerate_paths, forced_choices, path_edge_matrix

CHECK_CAP = 2 * 10**7


# --- events -------------------------------------------------------------------


@dataclass(frozen=True)
class PathEvent:
    """A set of level-m coarse paths, by enumeration index."""

    params: LatticeParams
    level: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        total = path_count(self.params, self.level)
        if idx and (idx[0] < 0 or idx[-1] >= total):
            raise AddressError(f"path index out of range for level {self.level}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def everything(cls, params: LatticeParams, level: int = 0) -> "PathEvent":
        return cls(params, level, tuple(range(path_count(params, level))))

    @classmethod
    def cylinder(cls, path: CoarsePath) -> "PathEvent":
        return cls(path.params, path.level, (path.index(),))

    @classmethod
    def of_paths(cls, paths: Iterable[CoarsePath]) -> "PathEvent":
        paths = list(paths)
        return cls(paths[0].params, paths[0].level, tuple(p.index() for p in paths))

    def measure(self) -> Fraction:
        return Fraction(len(self.indices), path_count(self.params, self.level))

    def choices(self) -> np.ndarray:
        return enumerate_paths(self.params, self.level)[list(self.indices)]

    def paths(self) -> list[CoarsePath]:
        return [CoarsePath(self.params, self.level, c) for c in self.choices()]

    def cell_incidence(self) -> np.ndarray:
        """(|A|, (bs)^m) boolean: level-m cell lies on the event's path."""
        m = self.level
        ind = np.zeros((len(self.indices), edge_count(self.params, m)), dtype=bool)
        if not self.indices:
            return ind
        edges = path_edge_matrix(self.params, m, self.choices()) if m else np.zeros((len(self.indices), 1), dtype=np.int64)
        np.put_along_axis(ind, edges, True, axis=1)
        return ind


# --- gamma and rho --------------------------------------------------------------


@dataclass(frozen=True)
class GammaResult:
    value: int
    stabilization: int
    terms: tuple[int, ...]


def gamma(S: CellSet) -> GammaResult:
    """sum_k (|S| - #level-k classes of S); the k = 0 term is |S| - 1."""
    cells = list(S.cells)
    if not cells:
        return GammaResult(0, 0, ())
    terms = []
    k = 0
    while True:
        classes = len({e.letters[:k] for e in cells})
        if classes == len(cells):
            break
        terms.append(len(cells) - classes)
        k += 1
    return GammaResult(sum(terms), k, tuple(terms))


@dataclass(frozen=True)
class RhoQuery:
    cells: CellSet
    event: PathEvent

    def __post_init__(self):
        if self.event.level > self.cells.level:
            raise AddressError("event level must not exceed the cell level")


def rho_density(q: RhoQuery, p: CoarsePath) -> int:
    """r_k^(n)(x; p) = b^(nk) if every cell lies on [p]_n, else 0."""
    n = q.cells.level
    if p.level != n:
        raise AddressError("path level must equal the cell level")
    k = len(q.cells)
    return p.params.b ** (n * k) if contains_cells(p, q.cells) else 0


def count_through_in(params: LatticeParams, S: CellSet, a: CoarsePath) -> int:
    """Number of level-n paths through S whose level-m class is ``a``."""
    n, m = S.level, a.level
    forced = forced_choices(params, S)
    if forced is None:
        return 0
    levels = a.levels()
    for d in range(m):
        for node, br in forced[d].items():
            if levels[d][node] != br:
                return 0
    deep = sum(len(forced[d]) for d in range(m, n))
    return params.b ** (decision_count(params, n) - decision_count(params, m) - deep)


def rho_measure(q: RhoQuery) -> Fraction:
    """b^gamma(S) mu_S(A) as an exact rational; 0 when no path passes through S."""
    params, S, A = q.event.params, q.cells, q.event
    forced = forced_choices(params, S)
    if forced is None:
        return Fraction(0)
    total = params.b ** (decision_count(params, S.level) - sum(len(f) for f in forced))
    inside = sum(count_through_in(params, S, a) for a in A.paths())
    return params.b ** gamma(S).value * Fraction(inside, total)


def mu_intersection(params: LatticeParams, S: CellSet, A: PathEvent) -> Fraction:
    """mu(A and {paths through S}) at level n = S.level."""
    inside = sum(count_through_in(params, S, a) for a in A.paths())
    return Fraction(inside, path_count(params, S.level))


# --- consistency engine ---------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    """Residuals of the marginalization and total-mass identities.

    Values are scaled by b^(D_m) so every rho is an integer; residuals are
    integers and must be exactly 0.  ``coincident_mass`` is the part of the
    marginal carried by tuples with repeated cells.
    """

    k: int
    n: int
    event_level: int
    marginal_residual: int
    total_mass_residual: int
    tuples: int
    coincident_mass: int

    @property
    def passed(self) -> bool:
        return self.marginal_residual == 0 and self.total_mass_residual == 0


class _Tables:
    def __init__(self, params: LatticeParams, n: int, A: PathEvent):
        if A.level > n:
            raise AddressError("event level must not exceed n")
        self.params, self.n, self.m = params, n, A.level
        bs = params.bs
        E = edge_count(params, n)
        idx = np.arange(E)
        self.anc = [idx // bs ** (n - d) for d in range(n)]
        self.anc_m = idx // bs ** (n - self.m)
        br, sg = letter_arrays(params, n)
        if n:
            diff = (br[:, None, :] != br[None, :, :]) | (sg[:, None, :] != sg[None, :, :])
            first = np.argmax(diff, axis=-1)
            same_branch = np.take_along_axis(br[:, None, :] == br[None, :, :], first[..., None], axis=-1)[..., 0]
            self.compat = ~diff.any(axis=-1) | same_branch
        else:
            self.compat = np.ones((1, 1), dtype=bool)
        self.on = A.cell_incidence().astype(np.int64)
        self.size_A = len(A.indices)
        self.E = E

    def count(self, cells: Sequence[np.ndarray]) -> np.ndarray:
        """#A-paths whose level-m trace holds the level-m ancestors of all cells."""
        cols = [self.on[:, self.anc_m[c]] for c in cells]
        prod = cols[0]
        for c in cols[1:]:
            prod = prod * c
        return prod.sum(axis=0)

    def rho(self, cells: Sequence[np.ndarray]) -> np.ndarray:
        """Scaled rho over a broadcast grid of cell tuples (k = len(cells)).

        Distinct tuples use b^gamma mu_S(A); tuples with repeated cells take
        the cell-average of rho over points of the repeated cell, which is
        b^(nk) mu(A and G_set) (the level-n density integrated over A).
        """
        b, n, m = self.params.b, self.n, self.m
        k = len(cells)
        shape = np.broadcast_shapes(*[np.shape(c) for c in cells])
        cells = [np.broadcast_to(c, shape) for c in cells]
        ok = np.ones(shape, dtype=bool)
        distinct = np.ones(shape, dtype=bool)
        for i in range(k):
            for j in range(i + 1, k):
                ok &= self.compat[cells[i], cells[j]]
                distinct &= cells[i] != cells[j]
        gam = np.zeros(shape, dtype=np.int64)
        low = np.zeros(shape, dtype=np.int64)
        high = np.zeros(shape, dtype=np.int64)
        for d in range(n):
            a = [self.anc[d][c] for c in cells]
            classes = np.ones(shape, dtype=np.int64)
            for i in range(1, k):
                new = np.ones(shape, dtype=bool)
                for j in range(i):
                    new &= a[i] != a[j]
                classes += new
            gam += k - classes
            if d < m:
                low += classes
            else:
                high += classes
        cnt = self.count(cells).reshape(shape) * ok
        # distinct: b^gamma * cnt * b^(F_<m) ;  coincident: cnt * b^(nk - F_>=m)
        exp = np.where(distinct, gam + low, n * k - high)
        return cnt * np.power(np.int64(b), exp)


def consistency_check(params: LatticeParams, k: int, n: int, A: PathEvent, cap: int = CHECK_CAP) -> ConsistencyReport:
    """Exact check of  sum_{x_k} rho_k nu(x_k) = rho_{k-1}  and  sum_x rho_1 nu = mu(A)."""
    if not 1 <= k <= 3:
        raise ValueError("k must be 1, 2 or 3")
    E = edge_count(params, n)
    if E**k > cap:
        raise CapExceededError(f"{E}^{k} tuples exceed cap {cap}")
    T = _Tables(params, n, A)
    bsn = params.bs**n
    idx = np.arange(E)
    scaled_mu = T.size_A * params.b ** decision_count(params, A.level) // path_count(params, A.level)
    r1 = T.rho([idx])
    total_res = abs(int(r1.sum()) - bsn * scaled_mu)
    coincident = 0
    if k == 1:
        marg = total_res
    elif k == 2:
        r2 = T.rho([idx[:, None], idx[None, :]])
        marg = int(np.abs(r2.sum(axis=1) - bsn * r1).max())
        coincident = int(np.trace(r2))
    else:
        r2 = T.rho([idx[:, None], idx[None, :]])
        marg = 0
        for x1 in range(E):
            r3 = T.rho([np.int64(x1), idx[:, None], idx[None, :]])
            marg = max(marg, int(np.abs(r3.sum(axis=1) - bsn * r2[x1]).max()))
            rep = (idx[:, None] == x1) | (idx[None, :] == x1) | (idx[:, None] == idx[None, :])
            coincident += int(r3[rep].sum())
    return ConsistencyReport(k, n, A.level, marg, total_res, E**k, coincident)


def rho_table(params: LatticeParams, n: int, A: PathEvent, k: int) -> np.ndarray:
    """Scaled rho_k over all k-tuples of level-n cells (exact integers, times b^-D_m)."""
    T = _Tables(params, n, A)
    idx = np.arange(edge_count(params, n))
    grids = np.ix_(*([idx] * k))
    return T.rho(list(grids))


# --- truncated expansions -------------------------------------------------------


def hermite_prob(m: int, x: np.ndarray) -> np.ndarray:
    """Probabilists' Hermite polynomial He_m."""
    h0, h1 = np.ones_like(x), x
    if m == 0:
        return h0
    for j in range(1, m):
        h0, h1 = h1, x * h1 - j * h0
    return h1


def chaos_terms(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float, A: PathEvent, K: int) -> np.ndarray:
    """Chaos components of M^(n)_beta(A), orders 0..K, shape (batch, K+1).

    The leaf weight exp(t g - t^2/2), g = xi / sqrt((b/s)^n), t = beta sqrt((b/s)^n),
    expands as sum_m t^m He_m(g)/m!.  Running the sum-product recursion on
    these series truncated at order K gives, at t^k, the sum over multi-indices
    of total order k of mu(A and G_supp) prod He_{m_e}(g_e)/m_e!, i.e. the k-th
    chaos of the mass with same-cell repetitions in Hermite form.
    """
    b, s = params.b, params.s
    xi_n = np.atleast_2d(xi_n)
    v = level_variance(params, n)
    g = xi_n / math.sqrt(v)
    t = beta * math.sqrt(v)
    leaf = np.stack([t**m * hermite_prob(m, g) / math.factorial(m) for m in range(K + 1)], axis=-1)
    levels = [leaf]
    x = leaf
    for _ in range(n):
        x = x.reshape(x.shape[0], -1, b, s, K + 1)
        prod = x[:, :, :, 0]
        for j in range(1, s):
            prod = _series_mul(prod, x[:, :, :, j])
        x = prod.sum(axis=2) / b
        levels.append(x)
    levels = levels[::-1]
    m = A.level
    if not A.indices:
        return np.zeros((xi_n.shape[0], K + 1))
    edges = path_edge_matrix(params, m, A.choices()) if m else np.zeros((len(A.indices), 1), dtype=np.int64)
    cells = levels[m]
    out = np.zeros((xi_n.shape[0], K + 1))
    for row in edges:
        prod = cells[:, row[0]]
        for e in row[1:]:
            prod = _series_mul(prod, cells[:, e])
        out += prod
    return out * float(Fraction(1, params.b ** decision_count(params, m)))


def _series_mul(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    K = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, c.shape))
    for i in range(K):
        out[..., i:] += a[..., i:i + 1] * c[..., : K - i]
    return out


def chaos_partial_sum(tree: NoiseTree, n: int, beta: float, A: PathEvent, K: int) -> float:
    """S_K: the chaos expansion of M^(n)_beta(A) truncated after order K."""
    if tree.depth < n:
        raise AddressError("tree too shallow")
    return float(chaos_terms(tree.params, tree.level(n)[None, :], n, beta, A, K)[0].sum())


def exact_event_mass(params: LatticeParams, xi_n: np.ndarray, n: int, beta: float, A: PathEvent) -> np.ndarray:
    """M^(n)_beta(A) per tree, for comparison with partial sums."""
    levels = log_reduce(params, leaf_log_weights(params, np.atleast_2d(xi_n), n, beta))
    lc = log_cylinder_masses(params, levels, A.level)[..., list(A.indices)]
    return np.exp(lc).sum(axis=-1)


def _exp_tail(x: float, K: int) -> float:
    """sum_{k > K} x^k / k!, accurate for small and large x."""
    if x <= 5.0:
        term = x ** (K + 1) / math.factorial(K + 1)
        tot, k = 0.0, K + 1
        while term > 1e-18 * max(tot, 1e-300):
            tot += term
            k += 1
            term *= x / k
        return tot
    return math.exp(x) - sum(x**k / math.factorial(k) for k in range(K + 1))


def truncation_variance_exact(params: LatticeParams, n: int, beta: float, K: int) -> float:
    """E[(Z_n - S_K)^2] = sum_{k>K} beta^{2k} E[m_n^k]/k!, from the exact PGF g_n."""
    g = intersection_pgf(params, n)
    probs = g.probabilities()
    v = level_variance(params, n)
    xs = beta**2 * v * g.support_points()
    return float(sum(p * _exp_tail(x, K) for p, x in zip(probs, xs)))


def chaos_variances_exact(params: LatticeParams, n: int, beta: float, K: int) -> list[float]:
    """Variance of each chaos order k = 0..K: beta^{2k} E[m_n^k] / k! (order 0 gives 1)."""
    g = intersection_pgf(params, n)
    probs = g.probabilities()
    xs = beta**2 * level_variance(params, n) * g.support_points()
    return [float(np.sum(probs * xs**k)) / math.factorial(k) for k in range(K + 1)]
