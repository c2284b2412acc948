"""Best protocol over a (beta, eta_c, L_tot) grid, as a CSV on standard output."""

import argparse
import csv
import itertools
import sys

import numpy as np

from nvqr import qkd
from nvqr.protocols import SystemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau-n", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=5)
    args = ap.parse_args()
    grid = [
        SystemParams(beta=float(b), eta_c=float(e), L_tot=float(L), tau_n=args.tau_n)
        for L, e, b in itertools.product(
            (100, 200, 300, 500),
            np.linspace(0.3, 0.9, args.points),
            np.geomspace(1e-4, 1e-2, args.points),
        )
    ]
    w = csv.writer(sys.stdout)
    w.writerow(["L_tot_km", "eta_c", "beta", "best", "n", "norm_key_rate", "ambiguous"])
    for pt in qkd.classify_region(grid):
        best = pt.best
        w.writerow([pt.params.L_tot, f"{pt.params.eta_c:.3g}", f"{pt.params.beta:.3g}", pt.label,
                    best.n if best else "", f"{best.R_qkd:.6g}" if best else 0, pt.ambiguous])


if __name__ == "__main__":
    main()
