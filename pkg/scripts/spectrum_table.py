#!/usr/bin/env python3
"""Singular values of Y^(n) by SVD next to the predicted clusters, and HS gaps."""

import argparse

from diamond_gmc import operator_y
from diamond_gmc.lattice import LatticeParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b", type=int, default=2)
    ap.add_argument("--s", type=int, default=3)
    ap.add_argument("--n-max", type=int, default=3)
    args = ap.parse_args()
    params = LatticeParams(args.b, args.s)

    for n in range(args.n_max + 1):
        summ = operator_y.singular_values(operator_y.build_y_matrix(params, n))
        pred = operator_y.predicted_spectrum(params, n)
        ok = operator_y.matches_spectrum(summ, pred)
        print(f"n={n}  shape={summ.values.size}  rank={summ.rank}  match={ok}")
        for (v, m), (pv, pm) in zip(summ.clusters, pred):
            print(f"    {v:.12f} x{m:<6d} predicted {pv:.12f} x{pm}")
        print(f"    HS gap {operator_y.hs_gap(params, n):.12f}  closed form {operator_y.hs_gap_closed_form(params, n):.12f}")


if __name__ == "__main__":
    main()
