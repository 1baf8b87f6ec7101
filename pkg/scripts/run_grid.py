"""Run an experiment grid from a config file and print the headline tables.

    python3 scripts/run_grid.py scripts/configs/small_grid.toml --out results/small
"""

import argparse
import csv
import sys
from pathlib import Path

from imputebench.cli import main as cli_main


def show(path: Path, title: str):
    print(f"\n== {title}")
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            print("  " + "  ".join(f"{c[:10]:>10s}" for c in row))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default="results/grid")
    ap.add_argument("--no-timing", action="store_true")
    args = ap.parse_args()
    argv = ["run", "--config", args.config, "--out", args.out] + (["--no-timing"] if args.no_timing else [])
    code = cli_main(argv)
    if code == 1:
        sys.exit(code)
    out = Path(args.out)
    show(out / "aggregates.csv", "test NRMSE by method / mechanism / rate")
    show(out / "ranks.csv", "mean ranks")
    show(out / "pareto.csv", "accuracy vs runtime")
    show(out / "fallback.csv", "LLM fallback usage")
    sys.exit(code)


if __name__ == "__main__":
    main()
