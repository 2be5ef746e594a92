"""Matrix representations and spectra of the path-averaging operators Y^(n).

Y^(n) maps a cell function psi to the path function
``p -> average of psi over the level-n trace of p``.  Matrices are written in
the orthonormal bases chi_p / sqrt(mu(p)) (rows, level-N paths) and
chi_e / sqrt(nu(e)) (columns, level-N cells) for some N >= n, so the SVD of
the matrix is the singular spectrum of the operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CapExceededError
from .lattice import LatticeParams, edge_count, path_count
from .paths import (
    _choices_from_levels,
    _levels_from_choices,
    enumerate_paths,
    path_edge_matrix,
    shared_bonds_batch,
)

DEFAULT_CAP = 10**7
CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of Y^(n) between level-N path and cell bases."""

    params: LatticeParams
    n: int
    level: int
    data: np.ndarray = field(repr=False)
    choices: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def _check_cap(params: LatticeParams, N: int, cap: int) -> None:
    size = path_count(params, N) * edge_count(params, N)
    if size > cap:
        raise CapExceededError(f"{path_count(params, N)} x {edge_count(params, N)} matrix exceeds cap {cap}")


def trace_indicator(params: LatticeParams, n: int, N: Optional[int] = None) -> np.ndarray:
    """Boolean (|Gamma_N|, |E_N|) array: level-N cell e sits under a cell of [p]_n."""
    N = n if N is None else N
    if N < n:
        raise ValueError("basis level N must be >= n")
    choices = enumerate_paths(params, N)
    if n:
        edges_n = path_edge_matrix(params, n, _coarsen_rows(params, N, n, choices))
    else:
        edges_n = np.zeros((len(choices), 1), dtype=np.int64)
    ind = np.zeros((len(choices), edge_count(params, n)), dtype=bool)
    np.put_along_axis(ind, edges_n, True, axis=1)
    return np.repeat(ind, params.bs ** (N - n), axis=1)


def _coarsen_rows(params: LatticeParams, N: int, n: int, choices: np.ndarray) -> np.ndarray:
    levels = _levels_from_choices(params.s, N, choices)[:n]
    return _choices_from_levels(params.s, n, levels)


def build_y_matrix(params: LatticeParams, n: int, level: Optional[int] = None, cap: int = DEFAULT_CAP) -> OperatorMatrix:
    """Matrix of Y^(n); entry(p, e) = sqrt(mu(p)) b^n sqrt(nu(e)) on the trace, else 0.

    At ``level == n`` the nonzero entries are sqrt(mu(p)) (b/s)^(n/2).
    """
    N = n if level is None else level
    _check_cap(params, N, cap)
    ind = trace_indicator(params, n, N)
    val = params.b**n / math.sqrt(path_count(params, N) * edge_count(params, N))
    return OperatorMatrix(params, n, N, ind * val, enumerate_paths(params, N))


@dataclass(frozen=True)
class SpectralSummary:
    """Singular values (descending, padded with zeros to the domain dimension)."""

    values: np.ndarray = field(repr=False)
    clusters: tuple[tuple[float, int], ...]
    hs_norm: float
    operator_norm: float
    domain_dim: int

    @property
    def rank(self) -> int:
        return sum(m for v, m in self.clusters if v > CLUSTER_TOL)


def _cluster(values: np.ndarray, tol: float) -> tuple[tuple[float, int], ...]:
    out: list[list] = []
    for v in values:
        if out and abs(out[-1][0] - v) <= tol:
            out[-1][1] += 1
        else:
            out.append([float(v), 1])
    # report each cluster at its mean rather than its first member
    res, k = [], 0
    for v, m in out:
        res.append((float(np.mean(values[k:k + m])), m))
        k += m
    return tuple(res)


def singular_values(matrix: OperatorMatrix, tol: float = CLUSTER_TOL) -> SpectralSummary:
    A = matrix.data
    sv = np.linalg.svd(A, compute_uv=False)
    dim = A.shape[1]
    vals = np.zeros(dim)
    vals[: min(len(sv), dim)] = sv[:dim]
    vals = np.sort(vals)[::-1]
    vals[np.abs(vals) < tol] = 0.0
    return SpectralSummary(
        values=vals,
        clusters=_cluster(vals, tol),
        hs_norm=float(math.sqrt(np.sum(vals**4))),
        operator_norm=float(vals[0]),
        domain_dim=dim,
    )


def predicted_spectrum(params: LatticeParams, n: int, N: Optional[int] = None) -> list[tuple[float, int]]:
    """Singular values of Y^(n) with multiplicities, zeros padded to |E_N|."""
    N = n if N is None else N
    out = [(1.0, params.b)] if n >= 1 else [(1.0, 1)]
    for k in range(2, n + 1):
        out.append((params.s ** (-(k - 1) / 2), params.bs ** (k - 1) * (params.b - 1)))
    out.append((0.0, edge_count(params, N) - predicted_rank(params, n)))
    return out


def predicted_rank(params: LatticeParams, n: int) -> int:
    return 1 + (params.b - 1) * sum(params.bs**k for k in range(n))


def matches_spectrum(summary: SpectralSummary, expected: list[tuple[float, int]], tol: float = 1e-10) -> bool:
    vals = np.concatenate([np.full(m, v) for v, m in expected if m > 0])
    return vals.size == summary.values.size and bool(np.max(np.abs(vals - summary.values)) <= tol)


def operator_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


# --- Hilbert-Schmidt norms --------------------------------------------------


def hs_limit_squared(params: LatticeParams) -> Fraction:
    """||Y Y*||_HS^2 = b(s-1)/(s-b)."""
    params.require_gmc()
    return Fraction(params.b * (params.s - 1), params.s - params.b)


def hs_norm_squared_exact(params: LatticeParams, n: int) -> Fraction:
    """Sum of lambda^4 over the spectrum of Y^(n): b + (b-1) sum_{k=1}^{n-1} (b/s)^k."""
    b, s = params.b, params.s
    if n == 0:
        return Fraction(1)
    return b + (b - 1) * sum((Fraction(b, s) ** k for k in range(1, n)), Fraction(0))


def hs_norm_yyt(params: LatticeParams, n: int) -> float:
    params.require_gmc()
    return math.sqrt(hs_norm_squared_exact(params, n))


def hs_gap(params: LatticeParams, n: int) -> float:
    """||Y^(n) Y^(n)* - Y Y*||_HS from the exact tail of the multiplicity sum.

    The two operators share eigenvectors, so the squared gap is the limit of
    the squared norms minus the level-n value.
    """
    return math.sqrt(hs_limit_squared(params) - hs_norm_squared_exact(params, n))


def hs_gap_closed_form(params: LatticeParams, n: int) -> float:
    b, s = params.b, params.s
    return (b / s) ** (n / 2) * math.sqrt(s * (b - 1) / (s - b))


def partial_trace(params: LatticeParams, n: int) -> Fraction:
    """Sum of the eigenvalues lambda^2 of Y^(n) Y^(n)*; grows without bound in n."""
    b, s = params.b, params.s
    if n == 0:
        return Fraction(1)
    return b + sum((Fraction((b * s) ** (k - 1) * (b - 1), s ** (k - 1)) for k in range(2, n + 1)), Fraction(0))


# --- eigenbasis ---------------------------------------------------------------


def helmert_frame(b: int) -> np.ndarray:
    """Orthonormal frame of R^b, rows v^(1..b), v^(1) = (1,...,1)/sqrt(b)."""
    V = np.zeros((b, b))
    V[0] = 1.0 / math.sqrt(b)
    for l in range(2, b + 1):
        V[l - 1, : l - 1] = 1.0
        V[l - 1, l - 1] = -(l - 1)
        V[l - 1] /= math.sqrt(l * (l - 1))
    return V


@dataclass(frozen=True)
class EigenvectorFamily:
    """Coordinates of f_(e,l) (cell side) and f-hat_(e,l) (path side).

    Row 0 is the constant function; then one row per (cell e of level k < n,
    frame index l >= 2), ordered by k, then e, then l.  Coordinates are in
    the orthonormal bases of :func:`build_y_matrix` at level n.
    """

    params: LatticeParams
    n: int
    frame: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)
    f: np.ndarray = field(repr=False)
    f_hat: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)


def eigenbasis_f(params: LatticeParams, n: int, cap: int = DEFAULT_CAP) -> EigenvectorFamily:
    b, s, bs = params.b, params.s, params.bs
    _check_cap(params, n, cap)
    V = helmert_frame(b)
    E, P = edge_count(params, n), path_count(params, n)
    sq_nu, sq_mu = math.sqrt(1.0 / E), math.sqrt(1.0 / P)
    choices = enumerate_paths(params, n)
    edges = path_edge_matrix(params, n, choices) if n else np.zeros((1, 1), dtype=np.int64)
    rows_f = [np.full(E, sq_nu)]
    rows_h = [np.full(P, sq_mu)]
    labels: list = [("const", 0, 0)]
    eig = [1.0]
    cells = np.arange(E)
    for k in range(n):
        # level-(k+1) ancestor of every level-n cell and its branch letter
        anc = cells // bs ** (n - k - 1)
        parent, branch = anc // bs, (anc % bs) // s
        # branch taken by each path inside each level-k cell it crosses
        anc_on_path = edges // bs ** (n - k - 1)
        for e in range(bs**k):
            under = parent == e
            hit = (anc_on_path // bs) == e
            on_path = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            br = (anc_on_path[np.arange(P), first] % bs) // s
            for l in range(2, b + 1):
                v = V[l - 1]
                fv = np.where(under, (s * b) ** (k / 2) * math.sqrt(b) * v[branch], 0.0)
                hv = np.where(on_path, b ** (k / 2) * math.sqrt(b) * v[br], 0.0)
                rows_f.append(fv * sq_nu)
                rows_h.append(hv * sq_mu)
                labels.append((k, e, l))
                eig.append(s ** (-k / 2))
    return EigenvectorFamily(params, n, V, tuple(labels), np.array(rows_f), np.array(rows_h), np.array(eig))


@dataclass(frozen=True)
class EigenActionReport:
    max_residual: float
    gram_f_error: float
    gram_fhat_error: float
    count: int


def verify_eigenaction(family: EigenvectorFamily, matrix: Optional[OperatorMatrix] = None) -> EigenActionReport:
    """Residuals of Y f = s^(-k/2) f-hat and deviations of both Gram matrices from I."""
    M = build_y_matrix(family.params, family.n) if matrix is None else matrix
    image = family.f @ M.data.T
    resid = np.linalg.norm(image - family.eigenvalues[:, None] * family.f_hat, axis=1)
    I = np.eye(len(family.f))
    return EigenActionReport(
        max_residual=float(resid.max()),
        gram_f_error=float(np.abs(family.f @ family.f.T - I).max()),
        gram_fhat_error=float(np.abs(family.f_hat @ family.f_hat.T - I).max()),
        count=len(family.f),
    )


# --- kernel -------------------------------------------------------------------


def shared_bond_matrix(params: LatticeParams, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    P = path_count(params, n)
    if P * P > cap:
        raise CapExceededError(f"{P} x {P} kernel exceeds cap {cap}")
    c = enumerate_paths(params, n)
    return shared_bonds_batch(params, n, c[:, None, :], c[None, :, :])


def kernel_matrix(params: LatticeParams, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """K^(n)(p, q) = (b/s)^n N^(n)(p, q) over all pairs of level-n paths."""
    return (params.b / params.s) ** n * shared_bond_matrix(params, n, cap)


def kernel_from_gram(matrix: OperatorMatrix) -> np.ndarray:
    """Gram matrix of the rows divided by the mu(p) normalization."""
    return path_count(matrix.params, matrix.level) * (matrix.data @ matrix.data.T)


def conditional_expectation(params: LatticeParams, n: int, N: int) -> np.ndarray:
    """Orthogonal projection onto level-n measurable cell functions, level-N coordinates."""
    E = edge_count(params, N)
    block = params.bs ** (N - n)
    anc = np.arange(E) // block
    return (anc[:, None] == anc[None, :]) / block
