"""Command line interface: ``hierlap {rates,qp-limit,checks,density-dump}``."""
from __future__ import annotations

import argparse
import math
import sys

from .errors import HierLapError
from .harness import (
    ExperimentConfig, density_dump, run_checks, run_qp_limit, run_rates,
)

FLAGS = (
    ("--preset", "preset", str, "qp or powerlaw"),
    ("--p", "p", int, "prime base of the qp preset"),
    ("--alpha", "alpha", float, "qp exponent; delta = 2 alpha"),
    ("--q", "q", float, "diameter base of the powerlaw preset"),
    ("--delta", "delta", float, "homogeneity exponent of the powerlaw preset"),
    ("--degree", "degree", int, "branching number (default p, or round(q))"),
    ("--noise", "noise", str, "kind:half_width, e.g. uniform:0.5"),
    ("--n-min", "n_min", int, "smallest depth N"),
    ("--n-max", "n_max", int, "largest depth N"),
    ("--method", "method", str, "cf, mc or both"),
    ("--trials", "trials", int, "Monte Carlo trials per depth"),
    ("--seed", "seed", int, "master seed"),
    ("--grid-r", "grid_r", float, "grid half-width R"),
    ("--grid-m", "grid_m", int, "grid points M (even)"),
    ("--out", "out", str, "output path (CSV report or JSON ledger)"),
    ("--workers", "workers", int, "Monte Carlo worker threads"),
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its keys")
    for flag, dest, typ, text in FLAGS:
        common.add_argument(flag, dest=dest, type=typ, default=None, help=text)
    parser = argparse.ArgumentParser(
        prog="hierlap",
        description="Normal approximation experiments for random hierarchical Laplacians.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rates", parents=[common], help="distance-to-normal sweep over N")
    sub.add_parser("qp-limit", parents=[common], help="non-Gaussian regime, alpha < 1/2")
    sub.add_parser("checks", parents=[common], help="run the invariant suites")
    sub.add_parser("density-dump", parents=[common], help="write the Lambda_N grid at n_max")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    return base.updated(**{dest: getattr(args, dest) for _, dest, _, _ in FLAGS})


def _print_rows(rows, columns) -> None:
    print(",".join(columns))
    for r in rows:
        print(",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c])
                       for c in columns))


def _report_limit(cfg: ExperimentConfig) -> bool:
    rep = run_qp_limit(cfg)
    _print_rows(rep.rows, ("N", "A_N", "tv_normal", "tv_limit", "kurt"))
    print(f"A = {rep.A:.8g}, limit kurtosis = {rep.kurt_limit:.8g}")
    verdicts = rep.verdicts()
    for name, ok in verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return all(verdicts.values())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "rates":
            delta = 2 * cfg.alpha if cfg.preset == "qp" else cfg.delta
            if delta < 1:
                print(f"delta = {delta:g} < 1: reporting the non-Gaussian regime instead")
                return 0 if _report_limit(cfg) else 1
            rep = run_rates(cfg)
            _print_rows(rep.rows, ("N", "v_N", "B_N", "L3", "tv", "kl", "kurt"))
            print(f"tv slope vs {rep.variable}: {rep.tv_slope:.4f} "
                  f"(bound exponent -{rep.tv_exponent:g})")
            print(f"kl slope vs {rep.variable}: {rep.kl_slope:.4f} "
                  f"(bound exponent -{rep.kl_exponent:g})")
            ok = (rep.slope_ok or math.isnan(rep.tv_slope)) and not rep.pinsker_violations
            return 0 if ok else 1
        if args.command == "qp-limit":
            return 0 if _report_limit(cfg) else 1
        if args.command == "checks":
            ledger = run_checks(cfg)
            for e in ledger["checks"]:
                print(f"{e['status'].upper():4} {e['name']}  {e['detail']}".rstrip())
            return 0 if ledger["passed"] else 1
        g = density_dump(cfg)
        print(f"N={cfg.n_max}: {g.M} points on [-{g.R:g}, {g.R:g}), "
              f"mass {g.mass:.12f}, variance {g.variance:.12f}")
        return 0
    except (HierLapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
