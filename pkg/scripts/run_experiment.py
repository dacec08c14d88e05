#!/usr/bin/env python3
"""Run an experiment matrix from a TOML config and print the metrics table.

Same engine as `socialsearch experiment run`, kept as a hackable script:
edit the post-processing at the bottom to slice the table differently.
"""

import argparse
import logging
import sys
from pathlib import Path

from socialsearch.cli import load_config
from socialsearch.experiment import run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", help="TOML config file")
    parser.add_argument("out", help="output directory for metrics.csv and manifest.txt")
    parser.add_argument("--workers", type=int, help="override the config worker count")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers

    table = run_experiment(cfg, out_dir=args.out)

    print(f"\n{len(table.rows)} rows -> {Path(args.out) / 'metrics.csv'}\n")
    header = f"{'embedding':<22} {'friendship':<24} {'w_d':>5} {'w_c':>5} {'w_p':>5} {'kappa':>5} {'success':>8} {'stretch':>8}"
    print(header)
    print("-" * len(header))
    for r in table.rows:
        print(
            f"{r.embedding:<22} {r.friendship:<24} "
            f"{r.weights.w_d:5.2f} {r.weights.w_c:5.2f} {r.weights.w_p:5.2f} "
            f"{r.kappa:5d} {r.success_rate:8.4f} {r.stretch:8.3f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
