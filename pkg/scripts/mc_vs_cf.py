"""Cross-check of the characteristic-function pipeline by Monte Carlo.

For each depth, compares binned L1 distances to the normal law, the
Kolmogorov distance between the sample and the inverted CDF, and the
sample moments against their exact values.

    python scripts/mc_vs_cf.py --alpha 1.0 --n-max 10 --trials 200000 --workers 4
"""
import argparse

import numpy as np

from hierlap import distances as dist
from hierlap.harness import ExperimentConfig
from hierlap.moments import kurtosis_excess, weight_profile
from hierlap.simulate import (
    SimPlan, binned_l1, dkw_radius, empirical_stats, kolmogorov_distance, sample_lambda_bar,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--noise", default="uniform:0.5")
    ap.add_argument("--n-min", type=int, default=4)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig(alpha=args.alpha, noise=args.noise, n_min=args.n_min,
                           n_max=args.n_max)
    noise = cfg.noise_spec
    normal = dist.normal_grid()
    print(f"{'N':>3} {'tv cf':>9} {'tv mc':>9} {'KS vs grid':>10} {'DKW99':>8} "
          f"{'kurt exact':>11} {'kurt mc':>9}")
    for N in cfg.n_values:
        lat, sch = cfg.model(N)
        prof = weight_profile(sch, lat)
        g = dist.grid_for(prof, noise)
        x = sample_lambda_bar(SimPlan(lat, sch, noise, args.trials, args.seed + N,
                                      args.workers))
        ks = kolmogorov_distance(x, lambda t: np.interp(t, g.xs, g.cdf()))
        s = empirical_stats(x)
        print(f"{N:3d} {dist.tv_distance(g, normal):9.2e} {binned_l1(x, normal):9.2e} "
              f"{ks:10.2e} {dkw_radius(x.size):8.2e} {kurtosis_excess(prof, noise):11.2e} "
              f"{s.excess_kurtosis:9.2e}")


if __name__ == "__main__":
    main()
