"""Side-by-side error rates of the three engines for one protocol."""

import argparse

from nvqr.protocols import RepeaterConfig, SystemParams, evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("protocol", nargs="?", default="P1")
    ap.add_argument("-n", type=int, default=1)
    ap.add_argument("--beta", type=float, default=1e-3)
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args()
    prm = SystemParams(beta=args.beta, eta_c=0.3, L_tot=100)
    print(f"{'engine':<16}{'decoder':<14}{'Q_z':>12}{'Q_x':>12}{'acceptance':>12}")
    for engine in ("dense", "approx-analytic", "pauli"):
        for decoder in ("majority", "error-detect"):
            cfg = RepeaterConfig(args.protocol, args.n, engine, decoder, args.samples, seed=0)
            d = evaluate(cfg, prm).decoded
            print(f"{engine:<16}{decoder:<14}{d.Q_z:>12.5g}{d.Q_x:>12.5g}{d.acceptance:>12.5g}")


if __name__ == "__main__":
    main()
