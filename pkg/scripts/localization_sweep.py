#!/usr/bin/env python3
"""Median largest cylinder share of the GMC across inverse temperatures."""

import argparse

import numpy as np

from diamond_gmc import gmc
from diamond_gmc.lattice import LatticeParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--m", type=int, default=1, help="cylinder level")
    ap.add_argument("--betas", default="0.5,1,2,4,8,16")
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    params = LatticeParams(2, 3)
    betas = [float(x) for x in args.betas.split(",")]
    med = gmc.localization_medians(params, args.n, args.m, betas, args.seeds, args.seed, args.workers)
    for bt, v in zip(betas, med):
        bar = "#" * int(round(40 * v))
        print(f"beta={bt:6.2f}  median max share={v:.6f}  {bar}")
    print("strictly increasing:", bool(np.all(np.diff(med) > 0)))


if __name__ == "__main__":
    main()
