"""Batch command-line driver: ``diamond-gmc <command> <action> [flags]``.

Every run produces a list of :class:`ResultRecord`, written as JSON (default)
or CSV with columns :data:`config.CSV_COLUMNS`.  Errors are reported as a JSON
object on stderr with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from typing import Callable

import numpy as np

from . import chaos, gmc, intersection, lattice, operator_y, paths, polymer
from .config import CSV_COLUMNS, ExperimentConfig, ResultRecord, records_to_json, records_to_rows
from .errors import DiamondError
from .rng import make_rng

EXPERIMENTS: dict[str, Callable[[ExperimentConfig], list[ResultRecord]]] = {}


def experiment(name: str):
    def register(fn):
        EXPERIMENTS[name] = fn
        return fn
    return register


def _inputs(cfg: ExperimentConfig, *extra: str) -> dict:
    keys = ("b", "s", "n", "beta", "seed") + extra
    return {k: getattr(cfg, k) for k in keys}


def _cells(cfg: ExperimentConfig) -> paths.CellSet:
    addrs = [lattice.EdgeAddress.parse(x) for x in cfg.cells.split(",") if x.strip()]
    if not addrs:
        raise ValueError("--cells needs at least one cell, e.g. 1.1/2.3,1.2")
    return paths.CellSet.of(addrs[0].level, addrs)


# --- lattice ------------------------------------------------------------------


@experiment("lattice count")
def _lattice_count(cfg):
    p = cfg.params
    vals = {"edges": lattice.edge_count(p, cfg.n), "paths": lattice.path_count(p, cfg.n),
            "vertices": lattice.vertex_count(p, cfg.n), "decisions": lattice.decision_count(p, cfg.n)}
    return [ResultRecord("lattice.count", _inputs(cfg), vals)]


@experiment("lattice dim")
def _lattice_dim(cfg):
    p = cfg.params
    vals = {"dimension": lattice.lattice_dimension(p)}
    if cfg.n >= 1:
        vals["covering_ratio"] = lattice.covering_dimension(p, cfg.n)
    return [ResultRecord("lattice.dim", _inputs(cfg), vals)]


@experiment("lattice dist")
def _lattice_dist(cfg):
    v1, v2 = lattice.VertexAddress.parse(cfg.v1), lattice.VertexAddress.parse(cfg.v2)
    d = lattice.metric_distance(cfg.params, v1, v2, cfg.n)
    return [ResultRecord("lattice.dist", _inputs(cfg, "v1", "v2"), {"distance": d, "distance_float": float(d)})]


# --- paths --------------------------------------------------------------------


@experiment("paths sample")
def _paths_sample(cfg):
    rng = make_rng(cfg.seed, 20, cfg.n)
    count = max(1, min(cfg.samples, 1000))
    out = [paths.sample_uniform_path(cfg.params, cfg.n, rng) for _ in range(count)]
    vals = {f"path{i}": str(q) for i, q in enumerate(out)}
    return [ResultRecord("paths.sample", _inputs(cfg, "samples"), vals, exact=False)]


@experiment("paths shared")
def _paths_shared(cfg):
    p = paths.CoarsePath.parse(cfg.params, cfg.n, cfg.path)
    q = paths.CoarsePath.parse(cfg.params, cfg.n, cfg.other)
    nshared = paths.shared_bonds(p, q)
    m = nshared * (cfg.b / cfg.s) ** cfg.n
    return [ResultRecord("paths.shared", _inputs(cfg, "path", "other"), {"shared": nshared, "m_n": m})]


@experiment("paths through")
def _paths_through(cfg):
    S = _cells(cfg)
    total = lattice.path_count(cfg.params, S.level)
    count = paths.count_paths_through(cfg.params, S)
    vals = {"count": count, "fraction": count / total}
    if count:
        vals["sample"] = str(paths.sample_path_through(cfg.params, S, make_rng(cfg.seed, 21)))
    return [ResultRecord("paths.through", _inputs(cfg, "cells"), vals)]


# --- intersection -------------------------------------------------------------


@experiment("intersect pgf")
def _intersect_pgf(cfg):
    g = intersection.intersection_pgf(cfg.params, cfg.n)
    vals = {str(int(k)): g.prob(int(k)) for k in g.support()}
    vals["derivative_at_one"] = g.derivative_at_one()
    return [ResultRecord("intersect.pgf", _inputs(cfg), vals)]


@experiment("intersect phi")
def _intersect_phi(cfg):
    ev = intersection.MgfEvaluator(cfg.params)
    vals = {f"n={k}": v for k, v in enumerate(ev.sequence(cfg.t, cfg.n))}
    try:
        vals["limit"] = ev.limit(cfg.t)
    except DiamondError as exc:
        vals["limit"] = f"diverges: {exc}"
    return [ResultRecord("intersect.phi", _inputs(cfg, "t"), vals)]


@experiment("intersect extinction")
def _intersect_extinction(cfg):
    p = intersection.extinction_probability(cfg.params)
    return [ResultRecord("intersect.extinction", _inputs(cfg), {"p": p})]


@experiment("intersect dim")
def _intersect_dim(cfg):
    t0 = time.perf_counter()
    est = intersection.estimate_dimension_mc(cfg.params, cfg.n, cfg.samples, make_rng(cfg.seed, 22))
    return [ResultRecord("intersect.dim", _inputs(cfg, "samples"),
                         {"estimate": est.estimate, "exponent": intersection.hausdorff_exponent(cfg.params)},
                         se={"estimate": est.se}, exact=False, wall_clock=time.perf_counter() - t0)]


# --- operator -----------------------------------------------------------------


@experiment("spectrum svd")
def _spectrum(cfg):
    summ = operator_y.singular_values(operator_y.build_y_matrix(cfg.params, cfg.n))
    vals = {f"sv{i}": {"value": v, "multiplicity": m} for i, (v, m) in enumerate(summ.clusters)}
    vals.update(hs_norm=summ.hs_norm, operator_norm=summ.operator_norm, rank=summ.rank,
                hs_gap=operator_y.hs_gap(cfg.params, cfg.n))
    return [ResultRecord("spectrum.svd", _inputs(cfg), vals)]


@experiment("spectrum hs")
def _spectrum_hs(cfg):
    p = cfg.params
    vals = {"hs_squared": operator_y.hs_norm_squared_exact(p, cfg.n),
            "hs_limit_squared": operator_y.hs_limit_squared(p),
            "hs_gap": operator_y.hs_gap(p, cfg.n), "hs_gap_closed_form": operator_y.hs_gap_closed_form(p, cfg.n)}
    return [ResultRecord("spectrum.hs", _inputs(cfg), vals)]


# --- gmc ----------------------------------------------------------------------


@experiment("gmc mass")
def _gmc_mass(cfg):
    m1, m2 = gmc.mc_mass_moments(cfg.params, cfg.n, cfg.beta, cfg.samples, cfg.seed, cfg.workers)
    exact2 = gmc.two_replica_moment(cfg.params, cfg.n, cfg.beta)
    return [ResultRecord("gmc.mass", _inputs(cfg, "samples"),
                         {"mean": m1.mean, "second_moment": m2.mean, "exact_mean": 1.0, "exact_second_moment": exact2},
                         se={"mean": m1.se, "second_moment": m2.se}, exact=False)]


@experiment("gmc replica")
def _gmc_replica(cfg):
    mom = gmc.replica_moments(cfg.params, cfg.n, cfg.beta)
    return [ResultRecord("gmc.replica", _inputs(cfg), {f"m{r}": v for r, v in enumerate(mom)})]


@experiment("gmc refine")
def _gmc_refine(cfg):
    rep = gmc.refinement_martingale_check(cfg.params, cfg.n, cfg.beta, cfg.samples, cfg.seed, cfg.workers)
    return [ResultRecord("gmc.refine", _inputs(cfg, "samples"),
                         {"mean_diff": rep.mean_diff.mean, "slope": rep.slope, "intercept": rep.intercept},
                         se={"mean_diff": rep.mean_diff.se}, exact=False)]


@experiment("gmc compose")
def _gmc_compose(cfg):
    rep = gmc.composition_check(cfg.params, cfg.n, cfg.beta, cfg.samples, cfg.seed, cfg.workers)
    vals = {f"rescaled_m{r + 1}": v for r, v in enumerate(rep.rescaled)}
    vals.update({f"composed_m{r + 1}": v for r, v in enumerate(rep.composed)})
    vals.update(max_rel_diff=rep.max_abs_diff, ks_pvalue=rep.ks_pvalue)
    return [ResultRecord("gmc.compose", _inputs(cfg, "samples"), vals, exact=not cfg.samples)]


@experiment("gmc shift-check")
def _gmc_shift(cfg):
    rng = make_rng(cfg.seed, 23, cfg.level)
    psi = rng.normal(size=cfg.params.bs**cfg.level)
    rep = gmc.shift_identity_check(cfg.params, cfg.n, cfg.beta, psi, cfg.level, cfg.samples, cfg.seed, cfg.workers)
    return [ResultRecord("gmc.shift", _inputs(cfg, "samples", "level"),
                         {"exact": rep.exact, "estimate": rep.estimate.mean, "z": rep.estimate.zscore(rep.exact)},
                         se={"estimate": rep.estimate.se}, exact=False)]


@experiment("gmc fractional")
def _gmc_fractional(cfg):
    est = gmc.fractional_moment_mc(cfg.params, cfg.n, cfg.beta, cfg.samples, cfg.seed, cfg.workers)
    return [ResultRecord("gmc.fractional", _inputs(cfg, "samples"),
                         {"sqrt_moment": est.mean, "bound": gmc.fractional_bound(cfg.beta)},
                         se={"sqrt_moment": est.se}, exact=False)]


@experiment("gmc localize")
def _gmc_localize(cfg):
    med = gmc.localization_medians(cfg.params, cfg.n, cfg.level, cfg.betas, cfg.samples, cfg.seed, cfg.workers)
    vals = {f"beta={bt:g}": float(v) for bt, v in zip(cfg.betas, med)}
    return [ResultRecord("gmc.localize", _inputs(cfg, "samples", "level", "betas"), vals, exact=False)]


@experiment("gmc tilted")
def _gmc_tilted(cfg):
    exact = gmc.tilted_intersection_moment(cfg.params, cfg.n, cfg.beta, cfg.alpha)
    vals, se = {"exact": exact}, {}
    if cfg.samples:
        est = gmc.tilted_moment_mc(cfg.params, cfg.n, cfg.beta, cfg.alpha, cfg.samples, cfg.seed, cfg.workers)
        vals["estimate"], se["estimate"] = est.mean, est.se
    return [ResultRecord("gmc.tilted", _inputs(cfg, "alpha", "samples"), vals, se=se, exact=not cfg.samples)]


# --- polymer ------------------------------------------------------------------


@experiment("polymer z")
def _polymer_z(cfg):
    dist = polymer.WeightDistribution(cfg.dist)
    bn = polymer.intermediate_disorder_beta(cfg.params, cfg.n, cfg.beta)
    env = polymer.sample_environment(cfg.params, cfg.n, dist, cfg.seed)
    vals = {"beta_n": bn, "Z": polymer.partition_function(env, bn),
            "exact_m2": polymer.replica_moment_exact(cfg.params, cfg.n, dist, bn, 2)}
    return [ResultRecord("polymer.z", _inputs(cfg, "dist"), vals, exact=False)]


@experiment("polymer converge")
def _polymer_converge(cfg):
    dist = polymer.WeightDistribution(cfg.dist)
    rows = polymer.convergence_experiment(cfg.params, cfg.beta, dist, cfg.n_list, cfg.samples, cfg.seed, cfg.workers)
    vals = {f"n={r.n}": {k: v for k, v in vars(r).items() if k != "n"} for r in rows}
    return [ResultRecord("polymer.converge", _inputs(cfg, "dist", "n_list", "samples"), vals, exact=not cfg.samples)]


# --- chaos --------------------------------------------------------------------


@experiment("chaos gamma")
def _chaos_gamma(cfg):
    S = _cells(cfg)
    g = chaos.gamma(S)
    vals = {"gamma": g.value, "stabilization": g.stabilization, "terms": list(g.terms),
            "paths_through": paths.count_paths_through(cfg.params, S)}
    return [ResultRecord("chaos.gamma", _inputs(cfg, "cells"), vals)]


@experiment("chaos check")
def _chaos_check(cfg):
    A = chaos.PathEvent.everything(cfg.params, 0)
    rep = chaos.consistency_check(cfg.params, cfg.K, cfg.n, A)
    vals = {"marginal_residual": rep.marginal_residual, "total_mass_residual": rep.total_mass_residual,
            "tuples": rep.tuples, "passed": rep.passed}
    return [ResultRecord("chaos.check", _inputs(cfg, "K"), vals)]


@experiment("chaos truncate")
def _chaos_truncate(cfg):
    vals = {f"K={k}": chaos.truncation_variance_exact(cfg.params, cfg.n, cfg.beta, k) for k in range(cfg.K + 1)}
    return [ResultRecord("chaos.truncate", _inputs(cfg, "K"), vals)]


# --- verify -------------------------------------------------------------------


@experiment("verify run")
def _verify(cfg):
    from .acceptance import verify_suite

    out = []
    for r in verify_suite(cfg.suite):
        vals = {"passed": r.passed, "skipped": r.skipped, **r.details}
        out.append(ResultRecord(f"criterion.{r.id}", {"suite": cfg.suite, "name": r.name}, vals,
                                wall_clock=r.elapsed))
    return out


# --- driver -------------------------------------------------------------------

DEFAULT_ACTION = {"spectrum": "svd", "verify": "run"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diamond-gmc", description="Diamond hierarchical lattice GMC toolkit.")
    ap.add_argument("command", nargs="?", default=None, help="lattice, paths, intersect, spectrum, gmc, polymer, chaos or verify")
    ap.add_argument("action", nargs="?", default=None, help="experiment within the command")
    ap.add_argument("--config", help="YAML file of config keys; flags override it")
    ap.add_argument("--b", type=int)
    ap.add_argument("--s", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--t", type=float)
    ap.add_argument("--K", type=int)
    ap.add_argument("--level", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--dist", choices=polymer.KINDS)
    ap.add_argument("--betas", type=lambda x: [float(v) for v in x.split(",")])
    ap.add_argument("--n-list", dest="n_list", type=lambda x: [int(v) for v in x.split(",")])
    ap.add_argument("--cells", help="comma-separated cell addresses, e.g. 1.1/2.3,1.2/1.1")
    ap.add_argument("--path", help="decision string of a coarse path")
    ap.add_argument("--other", help="second decision string (paths shared)")
    ap.add_argument("--v1")
    ap.add_argument("--v2")
    ap.add_argument("--suite", choices=("fast", "full"))
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=("json", "csv"))
    return ap


def run(cfg: ExperimentConfig) -> list[ResultRecord]:
    name = f"{cfg.command} {cfg.action}"
    if name not in EXPERIMENTS:
        raise KeyError(name)
    t0 = time.perf_counter()
    records = EXPERIMENTS[name](cfg)
    elapsed = time.perf_counter() - t0
    for r in records:
        if not r.wall_clock:
            r.wall_clock = elapsed
    return records


def render(records: list[ResultRecord], fmt: str) -> str:
    if fmt == "json":
        return records_to_json(records) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(records_to_rows(records))
    return buf.getvalue()


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    try:
        cfg = ExperimentConfig.from_sources(args.config, overrides)
    except (ValueError, TypeError, OSError, DiamondError) as exc:
        return _fail("config", str(exc), 2)
    if not cfg.action:
        cfg.action = DEFAULT_ACTION.get(cfg.command, "")
    name = f"{cfg.command} {cfg.action}"
    if name not in EXPERIMENTS:
        known = sorted(EXPERIMENTS)
        return _fail("unknown_experiment", f"{name!r} is not one of {known}", 2)
    np.seterr(over="ignore", under="ignore")
    try:
        records = run(cfg)
    except (DiamondError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    text = render(records, cfg.format)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.command == "verify" and not all(r.values["passed"] for r in records):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
