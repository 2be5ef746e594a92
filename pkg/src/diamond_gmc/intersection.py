"""Generating functions of the shared-bond count and the intersection branching process.

For two independent uniform paths, the level-n shared-bond count N^(n) has
PGF ``g_n`` with ``g_0(z) = z`` and ``g_{n+1} = (b-1)/b + g_n^s / b``.  The
rescaled count ``m_n = (b/s)^n N^(n)`` is a mean-one martingale whose MGF
``phi_n(t) = g_n(exp(t (b/s)^n))`` converges to the MGF of the intersection
time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

import gmpy2
import numpy as np

from .errors import CapExceededError, DivergenceError, RangeError
from .lattice import LatticeParams, decision_count

DEFAULT_MAX_DEGREE = 10**5
# total bits of a packed power; keeps a single big-int product under ~256 MB
_MAX_PACKED_BITS = 1 << 31
_LOG_OVERFLOW = 709.0
DIVERGENCE_THRESHOLD = 1e300


# --- exact PGF ----------------------------------------------------------------


@dataclass(frozen=True)
class Pgf:
    """Exact law of N^(n).

    Stored as integer numerators over the common denominator b^(D_n).  For
    n >= 1 the support lies in multiples of s, so ``numerators[k]`` is the
    weight of N = k*s (``stride = s``); at n = 0 the law is a point mass at 1.
    """

    params: LatticeParams
    level: int
    numerators: tuple
    denominator: int
    stride: int

    @property
    def degree(self) -> int:
        return self.stride * (len(self.numerators) - 1)

    def prob(self, k: int) -> Fraction:
        if k < 0 or k % self.stride:
            return Fraction(0)
        r = k // self.stride
        return Fraction(self.numerators[r], self.denominator) if r < len(self.numerators) else Fraction(0)

    @cached_property
    def coefficients(self) -> list[Fraction]:
        """Dense list c_0..c_deg with c_k = P[N = k]."""
        out = [Fraction(0)] * (self.degree + 1)
        for r, c in enumerate(self.numerators):
            if c:
                out[r * self.stride] = Fraction(c, self.denominator)
        return out

    def support_points(self) -> np.ndarray:
        """Float values k*stride matching :meth:`probabilities`."""
        return np.arange(len(self.numerators), dtype=float) * self.stride

    def support(self) -> np.ndarray:
        return np.nonzero([c != 0 for c in self.numerators])[0] * self.stride

    def total(self) -> Fraction:
        return Fraction(sum(self.numerators), self.denominator)

    def derivative_at_one(self) -> Fraction:
        return Fraction(sum(r * self.stride * c for r, c in enumerate(self.numerators)), self.denominator)

    def factorial_moment(self, k: int) -> Fraction:
        """E[N(N-1)...(N-k+1)] from the dense coefficients."""
        tot = 0
        for r, c in enumerate(self.numerators):
            N = r * self.stride
            tot += c * math.perm(N, k)
        return Fraction(tot, self.denominator)

    def probabilities(self) -> np.ndarray:
        """Float probabilities of the support points ``k*stride``."""
        return np.array([c / self.denominator for c in self.numerators], dtype=float)

    def log_eval(self, log_z: float) -> float:
        """``log g(z)`` for real z = exp(log_z), by log-sum-exp over coefficients."""
        logs = _log_numerators(self.numerators)
        terms = logs + np.arange(len(logs)) * (self.stride * log_z)
        mx = np.max(terms)
        return float(mx + np.log(np.sum(np.exp(terms - mx))) - _log_int(self.denominator))

    def __call__(self, z: float) -> float:
        if z <= 0:
            if z == 0:
                return float(Fraction(self.numerators[0], self.denominator))
            return float(sum(Fraction(c, self.denominator) * Fraction(z) ** (r * self.stride)
                             for r, c in enumerate(self.numerators)))
        val = self.log_eval(math.log(z))
        if val > _LOG_OVERFLOW:
            raise RangeError(f"g_n(z) overflows at z={z}")
        return math.exp(val)


def _log_int(x: int) -> float:
    return math.log(x) if x > 0 else -math.inf


def _log_numerators(nums) -> np.ndarray:
    return np.array([_log_int(int(c)) for c in nums])


def _unpack(packed, slots: int, width_bytes: int) -> list[int]:
    raw = int(packed).to_bytes(slots * width_bytes, "little")
    return [int.from_bytes(raw[k * width_bytes:(k + 1) * width_bytes], "little") for k in range(slots)]


def _pack(coeffs, width_bytes: int):
    raw = b"".join(int(c).to_bytes(width_bytes, "little") for c in coeffs)
    return gmpy2.mpz(int.from_bytes(raw, "little"))


def _poly_power(coeffs: list[int], e: int, max_coeff_bits: int) -> list[int]:
    """``(sum c_k y^k)^e`` for nonnegative integer c_k by Kronecker substitution."""
    width = (max_coeff_bits + 8) // 8 + 1
    deg = (len(coeffs) - 1) * e
    if 8 * width * (deg + 1) > _MAX_PACKED_BITS:
        raise CapExceededError(f"packed power needs {8 * width * (deg + 1)} bits")
    return _unpack(_pack(coeffs, width) ** e, deg + 1, width)


def intersection_pgf(params: LatticeParams, n: int, max_degree: int = DEFAULT_MAX_DEGREE) -> Pgf:
    """Exact PGF of N^(n) for an independent uniform pair of level-n paths."""
    b, s = params.b, params.s
    if n < 0:
        raise ValueError("level must be >= 0")
    if s**n > max_degree:
        raise CapExceededError(f"degree s^n = {s**n} exceeds cap {max_degree}")
    if n == 0:
        return Pgf(params, 0, (0, 1), 1, 1)
    # H_1(y) = (b-1) + y over b with y = z^s; then H_{k+1} = (b-1) b^{s D_k} + H_k^s
    h = [b - 1, 1]
    D = 1
    for _ in range(1, n):
        bits = math.ceil(s * D * math.log2(b)) + 1
        h = _poly_power(h, s, bits)
        h[0] += (b - 1) * b ** (s * D)
        D = 1 + s * D
    assert D == decision_count(params, n)
    return Pgf(params, n, tuple(h), b**D, s)


# --- truncated series for exact moments ---------------------------------------


def _series_mul(a: list, c: list, order: int) -> list:
    out = [Fraction(0)] * (order + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(order + 1 - i):
                out[i + j] += x * c[j]
    return out


def _series_pow(a: list, e: int, order: int) -> list:
    out = [Fraction(1)] + [Fraction(0)] * order
    base = list(a)
    while e:
        if e & 1:
            out = _series_mul(out, base, order)
        e >>= 1
        if e:
            base = _series_mul(base, base, order)
    return out


def _iterate_series(params: LatticeParams, n: int, start: list, order: int, rescale: bool) -> list:
    """Run ``f <- (b-1)/b + f(r t)^s / b`` n times on a truncated series.

    With ``rescale`` the argument is scaled by r = b/s each step, which is the
    MGF recursion; without it this is the PGF recursion at a fixed point.
    """
    b, s = params.b, params.s
    ratio = Fraction(b, s)
    f = list(start)
    for _ in range(n):
        if rescale:
            f = [c * ratio**k for k, c in enumerate(f)]
        f = [c / b for c in _series_pow(f, s, order)]
        f[0] += Fraction(b - 1, b)
    return f


def pgf_derivative_at_one(params: LatticeParams, n: int) -> Fraction:
    """g_n'(1), exact, by dual-number propagation through the recursion."""
    # g_0(1 + eps) = 1 + eps
    return _iterate_series(params, n, [Fraction(1), Fraction(1)], 1, rescale=False)[1]


def martingale_moments(params: LatticeParams, n: int, order: int = 3) -> list[Fraction]:
    """Exact E[m_n^k] for k = 1..order (order <= 3)."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return moments_mn(params, n, order)


def moments_mn(params: LatticeParams, n: int, order: int) -> list[Fraction]:
    """Exact E[m_n^k], k = 1..order, from the Taylor series of phi_n at 0."""
    # phi_n(t) = (b-1)/b + phi_{n-1}((b/s) t)^s / b ; phi_0 = e^t
    start = [Fraction(1, math.factorial(k)) for k in range(order + 1)]
    f = _iterate_series(params, n, start, order, rescale=True)
    return [f[k] * math.factorial(k) for k in range(1, order + 1)]


def second_moment_sequence(params: LatticeParams, n: int, exact: bool = False) -> list:
    """v_0..v_n from v_{k+1} = b(s-1)/s + (b/s) v_k, v_0 = 1."""
    b, s = params.b, params.s
    if exact:
        a, r, v = Fraction(b * (s - 1), s), Fraction(b, s), Fraction(1)
    else:
        a, r, v = b * (s - 1) / s, b / s, 1.0
    out = [v]
    for _ in range(n):
        v = a + r * v
        out.append(v)
    return out


def second_moment_limit(params: LatticeParams) -> Fraction:
    params.require_gmc()
    return Fraction(params.b * (params.s - 1), params.s - params.b)


# --- pointwise MGF ----------------------------------------------------------


def _step_w(w: float, b: int, s: int) -> float:
    """(phi^s - 1)/b written on w = phi - 1."""
    if w <= -1.0:
        return -1.0 / b
    x = s * math.log1p(w)
    if x > _LOG_OVERFLOW:
        raise RangeError("MGF iterate overflows")
    return math.expm1(x) / b


def iterate_mgf(params: LatticeParams, n: int, w0: float) -> float:
    """Apply the (1/b)-affine power recursion n times to ``phi - 1 = w0``."""
    w = w0
    for _ in range(n):
        w = _step_w(w, params.b, params.s)
    return w


def mgf_phi(params: LatticeParams, n: int, t: float) -> float:
    """E[exp(t m_n)] evaluated as phi_n(t) = g_n(exp(t (b/s)^n)).

    Iterates on w = phi - 1 with expm1/log1p.  Starting from the equivalent
    form phi_0(t (b/s)^n) keeps the argument small, which avoids the (s/b)^n
    amplification of rounding error the forward form would suffer.
    """
    x = t * (params.b / params.s) ** n
    if x > _LOG_OVERFLOW:
        raise RangeError(f"exp({x}) overflows")
    return 1.0 + iterate_mgf(params, n, math.expm1(x))


@dataclass
class MgfEvaluator:
    """Evaluates phi_n and its limit with a relative Cauchy stopping rule."""

    params: LatticeParams
    tol: float = 1e-13
    max_iter: int = 5000
    threshold: float = DIVERGENCE_THRESHOLD

    def phi(self, n: int, t: float) -> float:
        return mgf_phi(self.params, n, t)

    def sequence(self, t: float, n_max: int) -> list[float]:
        return [self.phi(n, t) for n in range(n_max + 1)]

    def limit(self, t: float, return_level: bool = False):
        self.params.require_gmc()
        prev = None
        for n in range(self.max_iter + 1):
            try:
                val = self.phi(n, t)
            except RangeError as exc:
                raise DivergenceError(f"phi_n({t}) overflows at n={n}") from exc
            if not math.isfinite(val) or abs(val) > self.threshold:
                raise DivergenceError(f"phi_n({t}) exceeds {self.threshold:g} at n={n}")
            if prev is not None and abs(val - prev) <= self.tol * max(1.0, abs(val)):
                return (val, n) if return_level else val
            prev = val
        raise DivergenceError(f"phi_n({t}) failed the Cauchy test within {self.max_iter} levels")


def mgf_phi_limit(params: LatticeParams, t: float, tol: float = 1e-13, max_iter: int = 5000) -> float:
    """phi_inf(t), the MGF of the intersection time (s > b)."""
    return MgfEvaluator(params, tol=tol, max_iter=max_iter).limit(t)


# --- extinction -------------------------------------------------------------


def extinction_map(params: LatticeParams, x: float) -> float:
    """G(x) = (1/b)[1 - (1 - x)^s]."""
    return -math.expm1(params.s * math.log1p(-x)) / params.b if x < 1 else 1.0 / params.b


def extinction_probability(params: LatticeParams, max_iter: int = 10000) -> float:
    """Attractive fixed point of G in (0, 1), iterated from x = 1.

    The iteration contracts at rate G'(p) (about 0.57 at (2,3)), so it is run
    until the float stops moving and then polished by one Newton step rather
    than stopped at a residual threshold.
    """
    params.require_gmc()
    b, s = params.b, params.s
    x = 1.0
    for _ in range(max_iter):
        nxt = extinction_map(params, x)
        if nxt == x:
            break
        x = nxt
    else:
        raise DivergenceError("extinction iteration did not settle")
    for _ in range(2):
        f = extinction_map(params, x) - x
        df = (s / b) * (1.0 - x) ** (s - 1) - 1.0
        x -= f / df
    if abs(extinction_map(params, x) - x) >= 1e-12 or not 0.0 < x < 1.0:
        raise DivergenceError("extinction fixed point not found")
    return x


# --- survival-conditioned chain ---------------------------------------------


def offspring_law(params: LatticeParams, p: Optional[float] = None) -> np.ndarray:
    """P[ell children] for ell = 1..s: zero-truncated Binomial(s, p)."""
    params.require_gmc()
    if p is None:
        p = extinction_probability(params)
    s = params.s
    ell = np.arange(1, s + 1)
    w = np.array([math.comb(s, int(l)) for l in ell]) * p**ell * (1 - p) ** (s - ell)
    return w / -math.expm1(s * math.log1p(-p))


def sample_offspring(params: LatticeParams, size: int, rng: np.random.Generator) -> np.ndarray:
    law = offspring_law(params)
    return rng.choice(np.arange(1, params.s + 1), size=size, p=law)


def simulate_survival_conditioned(params: LatticeParams, n: int, rng: np.random.Generator,
                                  runs: Optional[int] = None) -> np.ndarray:
    """Trajectories Ñ_0..Ñ_n of the survival-conditioned chain.

    Returns shape (n+1,) for a single run, or (runs, n+1).
    """
    law = offspring_law(params)
    R = 1 if runs is None else runs
    ell = np.arange(1, params.s + 1)
    traj = np.empty((R, n + 1), dtype=np.int64)
    traj[:, 0] = 1
    for k in range(n):
        counts = rng.multinomial(traj[:, k], law)
        traj[:, k + 1] = counts @ ell
    return traj[0] if runs is None else traj


def hausdorff_exponent(params: LatticeParams) -> float:
    if params.s < params.b:
        params.require_gmc()
    return (math.log(params.s) - math.log(params.b)) / math.log(params.s)


@dataclass(frozen=True)
class DimensionEstimate:
    estimate: float
    se: float
    mean_counts: np.ndarray


def _slope_estimate(traj: np.ndarray, s: int) -> float:
    ks = np.arange(1, traj.shape[1])
    y = np.log(traj[:, 1:].mean(axis=0))
    slope = np.polyfit(ks, y, 1)[0]
    return float(slope / math.log(s))


def estimate_dimension_mc(params: LatticeParams, n: int, samples: int, rng: np.random.Generator,
                          batches: int = 20) -> DimensionEstimate:
    """Slope of log mean survivor count against k, divided by log s."""
    params.require_gmc()
    traj = simulate_survival_conditioned(params, n, rng, runs=samples)
    est = _slope_estimate(traj, params.s)
    parts = [_slope_estimate(chunk, params.s) for chunk in np.array_split(traj, batches) if len(chunk)]
    se = float(np.std(parts, ddof=1) / math.sqrt(len(parts))) if len(parts) > 1 else math.nan
    return DimensionEstimate(est, se, traj[:, 1:].mean(axis=0))
