"""Key rate of the encoded protocols against total distance.

Usage: python scripts/distance_sweep.py [--long-coherence]
"""

import argparse

import numpy as np

from nvqr import qkd
from nvqr.protocols import SystemParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--long-coherence", action="store_true", help="tau_e = 100 ms, tau_n = 10 s")
    ap.add_argument("--eta-c", type=float, default=0.5)
    ap.add_argument("--beta", type=float, default=1e-3)
    args = ap.parse_args()
    taus = dict(tau_e=0.1, tau_n=10.0) if args.long_coherence else {}
    print(f"{'L_tot':>7}{'P1':>18}{'P2':>18}")
    for L in np.linspace(100, 2000, 20):
        prm = SystemParams(beta=args.beta, eta_c=args.eta_c, L_tot=float(L), **taus)
        recs = [qkd.optimize_nesting(p, prm, range(1, 11)) for p in ("P1", "P2")]
        print(f"{L:>7.0f}" + "".join(f"{r.R_qkd:>13.4g} n={r.n:<2}" for r in recs))


if __name__ == "__main__":
    main()
