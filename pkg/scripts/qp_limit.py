"""Non-Gaussian regime of the p-adic operator (alpha < 1/2).

Tabulates the distance of Lambda_N to the normal law and to the limit law,
the kurtosis against the limit series, and the convergence of the scale A_N.

    python scripts/qp_limit.py --alpha 0.25 --n-max 18
"""
import argparse

import numpy as np

from hierlap.harness import ExperimentConfig, run_qp_limit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=0.25)
    ap.add_argument("--noise", default="uniform:0.5")
    ap.add_argument("--n-min", type=int, default=8)
    ap.add_argument("--n-max", type=int, default=16)
    ap.add_argument("--out", default=None, help="CSV path for the report")
    args = ap.parse_args()

    cfg = ExperimentConfig(p=args.p, alpha=args.alpha, noise=args.noise,
                           n_min=args.n_min, n_max=args.n_max, out=args.out)
    rep = run_qp_limit(cfg)
    print(f"A = {rep.A:.8f}   limit excess kurtosis = {rep.kurt_limit:.8f}")
    print(f"{'N':>3} {'tv_normal':>10} {'tv_limit':>10} {'kurt gap':>10} {'A - A_N':>10}")
    for r in rep.rows:
        print(f"{r['N']:3d} {r['tv_normal']:10.6f} {r['tv_limit']:10.3e} "
              f"{r['kurt'] - rep.kurt_limit:10.2e} {rep.A - r['A_N']:10.3e}")
    gaps = rep.A - rep.column("A_N")
    ratio = float(np.exp(np.mean(np.log(gaps[:-1] / gaps[1:]))))
    print(f"mean contraction of A - A_N per level: {ratio:.4f}")
    for name, ok in rep.verdicts().items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")


if __name__ == "__main__":
    main()
