"""The (1/b) sum-product recursion shared by the GMC, polymer and chaos modules.

A diamond's normalized partition function is ``Z(c) = (1/b) sum_i prod_j Z(c.ij)``.
Here the recursion runs on flat cell arrays (trailing axis = cell index), in
the log domain, so leaf weights far outside the float range are fine.  The
moment recursions for two and three replicas are written on ``moment - 1``
with expm1/log1p to keep full relative precision near 1.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import RangeError
from .lattice import LatticeParams

_LOG_MAX = 709.0


def log_reduce(params: LatticeParams, log_leaf: np.ndarray) -> list[np.ndarray]:
    """Per-level log partition functions, ``out[k]`` over level-k cells.

    ``log_leaf`` has trailing axis of length (bs)^n; leading axes are batch.
    """
    b, s = params.b, params.s
    x = np.asarray(log_leaf, dtype=float)
    out = [x]
    log_b = math.log(b)
    while x.shape[-1] > 1:
        x = x.reshape(x.shape[:-1] + (-1, b, s)).sum(axis=-1)
        x = logsumexp(x, axis=-1) - log_b
        out.append(x)
    return out[::-1]


def log_root(params: LatticeParams, log_leaf: np.ndarray) -> np.ndarray:
    return log_reduce(params, log_leaf)[0][..., 0]


def reduce_linear(params: LatticeParams, leaf: np.ndarray) -> np.ndarray:
    """Plain-float version of the root value, for moderate leaf weights."""
    b, s = params.b, params.s
    x = np.asarray(leaf, dtype=float)
    while x.shape[-1] > 1:
        x = x.reshape(x.shape[:-1] + (-1, b, s)).prod(axis=-1).sum(axis=-1) / b
    return x[..., 0]


def _power_step(w: float, s: int) -> float:
    """(1 + w)^s - 1."""
    if w <= -1.0:
        return -1.0
    x = s * math.log1p(w)
    if x > _LOG_MAX:
        raise RangeError("replica moment overflows")
    return math.expm1(x)


def pair_moment(params: LatticeParams, n: int, leaf_minus_one: float) -> float:
    """u_n from u <- (b-1)/b + u^s/b, started at u_0 = 1 + leaf_minus_one."""
    a = leaf_minus_one
    for _ in range(n):
        a = _power_step(a, params.s) / params.b
    return 1.0 + a


def triple_moment(params: LatticeParams, n: int, pair_leaf_minus_one: float, triple_leaf_minus_one: float) -> float:
    """psi_n from psi <- psi^s/b^2 + 3(b-1)u^s/b^2 + (b-1)(b-2)/b^2.

    The constant terms sum to one, so on c = psi - 1 and a = u - 1 the
    recursion reads c <- [(1+c)^s - 1]/b^2 + 3(b-1)[(1+a)^s - 1]/b^2.
    """
    b, s = params.b, params.s
    a, c = pair_leaf_minus_one, triple_leaf_minus_one
    for _ in range(n):
        pa = _power_step(a, s)
        c = _power_step(c, s) / b**2 + 3 * (b - 1) * pa / b**2
        a = pa / b
    return 1.0 + c


def compose_moments(params: LatticeParams, moments: Sequence[float], order: int) -> float:
    """E[X^order] for X = (1/b) sum_i prod_j Y_ij with i.i.d. Y of given moments.

    ``moments[r]`` is E[Y^r] (moments[0] = 1).  Expands over assignments of
    the replicas to branches: each branch i hosting r_i replicas contributes
    E[Y^r_i]^s.
    """
    b, s = params.b, params.s
    total = 0.0
    for assign in itertools.product(range(b), repeat=order):
        counts = np.bincount(assign, minlength=b)
        total += math.prod(moments[int(r)] ** s for r in counts)
    return total / b**order
