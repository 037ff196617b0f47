#!/usr/bin/env python3
"""Run the full benchmark grid behind the convergence figures.

Covers every environment with all applicable algorithms and both step
rules at two horizons each.  Traces and the summary land in the output
directory; plot log(rel_subopt) over iter or time_ms from the CSVs.

Usage: python scripts/run_benchmarks.py [outdir] [--parallel N] [--quick]
"""

import argparse
import sys

from trajopt.cli import main as cli_main

GRID = [
    # env, algos, horizons, iters
    ("pendulum", "gd,gn,ne,ddp-lq,ddp-q", "50,100", 200),
    ("cartpole", "gd,gn,ne,ddp-lq,ddp-q", "25,50", 200),
    ("simple-car", "gd,gn,ne,ddp-lq,ddp-q", "25,50", 200),
    # gradient steps are numerically unstable on the tire-force model
    ("bicycle-car", "gn,ne,ddp-lq,ddp-q", "30,50", 150),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", nargs="?", default="benchmark_results")
    parser.add_argument("--parallel", type=int, default=1)
    parser.add_argument("--quick", action="store_true",
                        help="smaller horizons and budgets for a smoke run")
    args = parser.parse_args()

    worst = 0
    for env, algos, horizons, iters in GRID:
        if args.quick:
            horizons = horizons.split(",")[0]
            iters = min(iters, 40)
        code = cli_main([
            "benchmark", "--env", env, "--algo", algos,
            "--linesearch", "directional,regularized",
            "--horizon", horizons, "--max-iters", str(iters),
            # one directory per env so each grid keeps its own summary.csv
            "--out", f"{args.outdir}/{env}", "--parallel", str(args.parallel),
        ])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
