"""Optimal-n key rate of every protocol against the gate error probability.

Usage: python scripts/beta_sweep.py [--eta-c 0.3] [--L-tot 100] [--engine pauli]
"""

import argparse

import numpy as np

from nvqr import qkd
from nvqr.protocols import SystemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta-c", type=float, default=0.3)
    ap.add_argument("--L-tot", type=float, default=100.0)
    ap.add_argument("--engine", default="approx-analytic")
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()
    protocols = ("P1", "P2", "P3", "P4")
    print("beta      " + "".join(f"{p:>16}" for p in protocols) + f"{'direct':>12}")
    for beta in np.geomspace(1e-4, 1e-2, args.points):
        prm = SystemParams(beta=float(beta), eta_c=args.eta_c, L_tot=args.L_tot)
        cells = []
        for i, p in enumerate(protocols):
            rec = qkd.optimize_nesting(p, prm, seed=(0, i), engine=args.engine, samples=args.samples)
            cells.append(f"{rec.R_qkd:>11.4g} n={rec.n}")
        print(f"{beta:<10.3g}" + "".join(cells) + f"{qkd.repeaterless_rate(prm):>12.4g}")


if __name__ == "__main__":
    main()
