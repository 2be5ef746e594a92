#!/usr/bin/env python3
"""Second moments of discrete polymers at beta_n = beta (b/s)^(n/2) against the GMC.

Prints, per level, the polymer E[Z^2], the level-n GMC value, and the
distance of each to the limit phi_inf(beta^2).  The last column shows the
contraction ratio of the polymer error, which tends to b/s.
"""

import argparse

from diamond_gmc import gmc, intersection, polymer
from diamond_gmc.lattice import LatticeParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b", type=int, default=2)
    ap.add_argument("--s", type=int, default=3)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--dist", default="rademacher", choices=polymer.KINDS)
    ap.add_argument("--n-max", type=int, default=50)
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()

    params = LatticeParams(args.b, args.s)
    dist = polymer.WeightDistribution(args.dist)
    limit = intersection.mgf_phi_limit(params, args.beta**2)
    print(f"# phi_inf({args.beta**2:g}) = {limit:.12g}")
    print(f"{'n':>3} {'polymer E[Z^2]':>18} {'GMC E[Z^2]':>18} {'|poly - lim|':>12} {'|gmc - lim|':>12} {'ratio':>7}")
    prev, first_below = None, None
    for n in range(args.n_max + 1):
        bn = polymer.intermediate_disorder_beta(params, n, args.beta)
        m2 = polymer.replica_moment_exact(params, n, dist, bn, 2)
        g2 = gmc.two_replica_moment(params, n, args.beta)
        err = abs(m2 - limit)
        ratio = f"{err / prev:7.4f}" if prev else " " * 7
        print(f"{n:3d} {m2:18.10g} {g2:18.10g} {err:12.4e} {abs(g2 - limit):12.4e} {ratio}")
        if first_below is None and err < args.tol:
            first_below = n
        prev = err
    print(f"# first n with |polymer - limit| < {args.tol:g}: {first_below}")


if __name__ == "__main__":
    main()
