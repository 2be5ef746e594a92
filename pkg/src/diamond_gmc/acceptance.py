"""The acceptance battery: one function per criterion, each returning a record.

``verify_suite("fast")`` runs the exact (non-stochastic) criteria and the
exact halves of mixed ones; ``"full"`` adds every Monte Carlo check at its
stated sample size.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import chaos, gmc, intersection, lattice, operator_y, polymer
from .lattice import LatticeParams
from .rng import MeanEstimate, make_rng

P23 = LatticeParams(2, 3)


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    elapsed: float
    details: dict = field(default_factory=dict)
    skipped: bool = False

    def line(self) -> str:
        tag = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{tag}] criterion {self.id:2d} {self.name} ({self.elapsed:.3f}s) {extra}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _best_time(fn: Callable, repeats: int = 20) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _timed(fn: Callable):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# --- criteria -----------------------------------------------------------------


def crit_01_extinction(full: bool = True) -> CriterionResult:
    target = (3 - math.sqrt(5)) / 2
    p = intersection.extinction_probability(P23)
    t = _best_time(lambda: intersection.extinction_probability(P23))
    err = abs(p - target)
    return CriterionResult(1, "extinction fixed point", err <= 1e-12 and t < 1e-3, t,
                           {"value": p, "abs_err": err, "best_time_s": t})


def crit_02_martingale_mean(full: bool = True) -> CriterionResult:
    def run():
        out = []
        for n in range(9):
            g = intersection.intersection_pgf(P23, n)
            out.append(g.derivative_at_one() * Fraction(2, 3) ** n)
        return out

    vals, t = _timed(run)
    dual = [intersection.pgf_derivative_at_one(P23, n) * Fraction(2, 3) ** n for n in range(9)]
    ok = all(v == 1 for v in vals) and all(v == 1 for v in dual) and t < 1.0
    return CriterionResult(2, "martingale mean g_n'(1)(b/s)^n = 1", ok, t, {"n_max": 8, "time_s": t})


def crit_03_second_moment_limit(full: bool = True) -> CriterionResult:
    def run():
        return intersection.second_moment_sequence(P23, 60)[-1]

    v60 = run()
    t = _best_time(run)
    hs2 = float(operator_y.hs_limit_squared(P23))
    closed = P23.b * (P23.s - 1) / (P23.s - P23.b)
    ok = abs(v60 - closed) <= 1e-9 and abs(v60 - hs2) <= 1e-9 and t < 1e-3
    return CriterionResult(3, "second-moment limit = HS norm squared", ok, t,
                           {"v60": v60, "hs_squared": hs2, "best_time_s": t})


def crit_04_spectrum(full: bool = True) -> CriterionResult:
    def run():
        return operator_y.singular_values(operator_y.build_y_matrix(P23, 2))

    summ, t = _timed(run)
    expected = [(1.0, 2), (3 ** -0.5, 6), (0.0, 28)]
    ok = operator_y.matches_spectrum(summ, expected, 1e-10) and t < 1.0
    return CriterionResult(4, "spectrum of Y^(2)", ok, t, {"clusters": [(round(v, 10), m) for v, m in summ.clusters]})


def crit_05_opnorm_gap(full: bool = True) -> CriterionResult:
    def run():
        worst = 0.0
        for N in (1, 2, 3):
            top = operator_y.build_y_matrix(P23, N).data
            for n in range(N):
                low = operator_y.build_y_matrix(P23, n, level=N).data
                worst = max(worst, abs(operator_y.operator_norm(top - low) - 3 ** (-n / 2)))
        return worst

    worst, t = _timed(run)
    return CriterionResult(5, "operator-norm gap s^(-n/2)", worst <= 1e-10, t, {"max_err": worst})


def crit_06_hs_gap(full: bool = True) -> CriterionResult:
    def run():
        return max(abs(operator_y.hs_gap(P23, n) - operator_y.hs_gap_closed_form(P23, n)) for n in range(7))

    worst, t = _timed(run)
    return CriterionResult(6, "HS gap closed form", worst <= 1e-12, t, {"max_err": worst})


def crit_07_gmc_normalization(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(7, "GMC normalization (MC)", True, 0.0, skipped=True)
    (m1, _), t = _timed(lambda: gmc.mc_mass_moments(P23, 3, 0.5, 10**5, seed=7))
    ok = m1.within(1.0) and t <= 60
    return CriterionResult(7, "GMC normalization (MC)", ok, t, {"mean": m1.mean, "se": m1.se, "z": m1.zscore(1.0)})


def crit_08_gmc_second_moment(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(8, "GMC second moment (MC)", True, 0.0, skipped=True)
    t0 = time.perf_counter()
    det, ok = {}, True
    for beta in (0.25, 0.5, 1.0):
        _, m2 = gmc.mc_mass_moments(P23, 3, beta, 10**5, seed=8)
        exact = gmc.two_replica_moment(P23, 3, beta)
        ok &= m2.within(exact)
        det[f"z(beta={beta})"] = m2.zscore(exact)
    t = time.perf_counter() - t0
    return CriterionResult(8, "GMC second moment (MC)", ok and t <= 120, t, det)


def crit_09_refinement(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(9, "refinement martingale (MC)", True, 0.0, skipped=True)
    rep, t = _timed(lambda: gmc.refinement_martingale_check(P23, 2, 0.5, 10**5, seed=9))
    ok = rep.mean_diff.within(0.0) and t <= 60
    return CriterionResult(9, "refinement martingale (MC)", ok, t,
                           {"mean_diff": rep.mean_diff.mean, "se": rep.mean_diff.se, "slope": rep.slope})


def crit_10_composition(full: bool = True) -> CriterionResult:
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(4):
        for beta in (0.25, 0.4, 0.8):
            worst = max(worst, gmc.composition_check(P23, n, beta).max_abs_diff)
    det = {"max_rel_moment_diff": worst}
    ok = worst <= 1e-12
    if full:
        rep = gmc.composition_check(P23, 2, 0.4, samples=10**4, seed=10)
        det["ks_p"] = rep.ks_pvalue
        ok &= rep.ks_pvalue > 0.01
    t = time.perf_counter() - t0
    return CriterionResult(10, "composition law", ok and t <= 120, t, det)


def crit_11_shift(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(11, "random-shift identity (MC)", True, 0.0, skipped=True)
    t0 = time.perf_counter()
    psis = {
        "zero": (np.zeros(1), 0),
        "constant": (np.array([0.7]), 0),
        "random_level1": (make_rng(11, 99).normal(size=P23.bs), 1),
    }
    det, ok = {}, True
    for name, (psi, k) in psis.items():
        rep = gmc.shift_identity_check(P23, 2, 0.5, psi, k, 10**6, seed=11)
        if name == "constant":
            ok &= abs(rep.exact - math.exp(0.5 * 0.7)) <= 1e-12
        if name == "zero":
            ok &= abs(rep.exact - 1.0) <= 1e-15
        ok &= rep.estimate.within(rep.exact)
        det[f"z_{name}"] = rep.estimate.zscore(rep.exact)
    t = time.perf_counter() - t0
    return CriterionResult(11, "random-shift identity (MC)", ok and t <= 120, t, det)


def crit_12_fractional(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(12, "fractional-moment bound (MC)", True, 0.0, skipped=True)
    t0 = time.perf_counter()
    det, ok = {}, True
    for beta in (2.0, 4.0):
        est = gmc.fractional_moment_mc(P23, 3, beta, 10**5, seed=12)
        det[f"E_sqrtZ(beta={beta})"] = est.mean
        ok &= est.mean <= gmc.fractional_bound(beta) + 3 * est.se
    t = time.perf_counter() - t0
    return CriterionResult(12, "fractional-moment bound (MC)", ok and t <= 60, t, det)


def crit_13_localization(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(13, "localization trend (MC)", True, 0.0, skipped=True)
    med, t = _timed(lambda: gmc.localization_medians(P23, 4, 1, [1, 2, 4, 8], 1000, seed=13))
    ok = bool(np.all(np.diff(med) > 0)) and t <= 300
    return CriterionResult(13, "localization trend (MC)", ok, t, {"medians": [float(x) for x in med]})


def crit_14_chaos(full: bool = True) -> CriterionResult:
    t0 = time.perf_counter()
    worst, checks = 0, 0
    for n in (1, 2, 3):
        events = [chaos.PathEvent.everything(P23, 0), chaos.PathEvent(P23, 1, (0,))]
        if n >= 2:
            events.append(chaos.PathEvent(P23, 2, (0, 3, 5, 10)))
        for A in events:
            for k in (1, 2, 3):
                rep = chaos.consistency_check(P23, k, n, A)
                worst = max(worst, rep.marginal_residual, rep.total_mass_residual)
                checks += 1
    t = time.perf_counter() - t0
    return CriterionResult(14, "chaos identities (exact)", worst == 0 and t <= 120, t,
                           {"max_residual": worst, "checks": checks})


def crit_15_truncation(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(15, "truncation variance (MC)", True, 0.0, skipped=True)
    t0 = time.perf_counter()
    beta, n = 0.3, 1
    xi = gmc.sample_noise_levels(P23, n, 10**4, make_rng(15, 0))[n]
    A = chaos.PathEvent.everything(P23, 0)
    z = chaos.exact_event_mass(P23, xi, n, beta, A)
    terms = chaos.chaos_terms(P23, xi, n, beta, A, 3)
    det, ok = {}, True
    for K in range(4):
        mse = MeanEstimate.of((z - terms[:, : K + 1].sum(axis=1)) ** 2)
        exact = chaos.truncation_variance_exact(P23, n, beta, K)
        ok &= mse.within(exact)
        det[f"z_K{K}"] = mse.zscore(exact)
    t = time.perf_counter() - t0
    return CriterionResult(15, "truncation variance (MC)", ok and t <= 60, t, det)


def crit_16_universality(full: bool = True) -> CriterionResult:
    t0 = time.perf_counter()
    gauss, rad = polymer.WeightDistribution("gaussian"), polymer.WeightDistribution("rademacher")
    worst = 0.0
    for n in range(31):
        bn = polymer.intermediate_disorder_beta(P23, n, 1.0)
        a = polymer.replica_moment_exact(P23, n, gauss, bn, 2)
        c = gmc.two_replica_moment(P23, n, 1.0)
        worst = max(worst, abs(a - c) / max(1.0, abs(c)))
    limit = intersection.mgf_phi_limit(P23, 1.0)
    errs = [abs(polymer.replica_moment_exact(P23, n, rad, polymer.intermediate_disorder_beta(P23, n, 1.0), 2) - limit)
            for n in range(31)]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    t = time.perf_counter() - t0
    ok_a = worst <= 1e-12
    ok_b = decreasing and errs[-1] < 1e-3
    return CriterionResult(16, "universality (exact iterations)", ok_a and ok_b and t < 1.0, t,
                           {"gauss_max_rel_diff": worst, "rademacher_decreasing": decreasing,
                            "rademacher_err_n30": errs[-1], "part_a": ok_a, "part_b": ok_b})


def crit_17_dimension(full: bool = True) -> CriterionResult:
    if not full:
        return CriterionResult(17, "dimension estimator (MC)", True, 0.0, skipped=True)
    est, t = _timed(lambda: intersection.estimate_dimension_mc(P23, 12, 10**4, make_rng(17, 0)))
    h = intersection.hausdorff_exponent(P23)
    ok = abs(est.estimate - h) <= 0.02 and t <= 60
    return CriterionResult(17, "dimension estimator (MC)", ok, t, {"estimate": est.estimate, "exponent": h})


def crit_18_metric(full: bool = True) -> CriterionResult:
    t0 = time.perf_counter()
    A, B = lattice.VERTEX_A, lattice.VERTEX_B
    ok = lattice.metric_distance(P23, A, B, 4) == 1
    rng = make_rng(18, 0)
    n = 4
    violations = 0
    triples = 10**4 if full else 10**3
    for _ in range(triples):
        x, y, z = (lattice.random_vertex(P23, n, rng) for _ in range(3))
        dxy = lattice.metric_distance(P23, x, y, n)
        dyz = lattice.metric_distance(P23, y, z, n)
        dxz = lattice.metric_distance(P23, x, z, n)
        violations += dxz > dxy + dyz
    bad_sim = 0
    pairs = 10**3
    letters = list(P23.letters())
    for _ in range(pairs):
        x, y = lattice.random_vertex(P23, 3, rng), lattice.random_vertex(P23, 3, rng)
        let = letters[int(rng.integers(len(letters)))]
        d = lattice.metric_distance(P23, x, y, 3)
        di = lattice.metric_distance(P23, lattice.similitude(P23, let, x), lattice.similitude(P23, let, y), 4)
        bad_sim += di != d / P23.s
    t = time.perf_counter() - t0
    ok = ok and violations == 0 and bad_sim == 0 and t <= 60
    return CriterionResult(18, "metric axioms and similitude", ok, t,
                           {"triangle_violations": violations, "similitude_mismatches": bad_sim, "triples": triples})


CRITERIA = [
    crit_01_extinction, crit_02_martingale_mean, crit_03_second_moment_limit, crit_04_spectrum,
    crit_05_opnorm_gap, crit_06_hs_gap, crit_07_gmc_normalization, crit_08_gmc_second_moment,
    crit_09_refinement, crit_10_composition, crit_11_shift, crit_12_fractional, crit_13_localization,
    crit_14_chaos, crit_15_truncation, crit_16_universality, crit_17_dimension, crit_18_metric,
]


def verify_suite(level: str = "fast") -> list[CriterionResult]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    full = level == "full"
    out = []
    for fn in CRITERIA:
        try:
            out.append(fn(full))
        except Exception as exc:  # a crash is a failed criterion, not a crashed suite
            cid = CRITERIA.index(fn) + 1
            out.append(CriterionResult(cid, fn.__name__, False, 0.0, {"error": repr(exc)}))
    return out
