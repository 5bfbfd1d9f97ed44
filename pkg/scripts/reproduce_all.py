#!/usr/bin/env python3
"""Run every shipped scenario config and print the per-criterion verdicts.

Usage: python3 scripts/reproduce_all.py [--out DIR] [--workers N] [--plots]
"""
import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from dpslab.experiments import SCENARIOS, load_config, run_scenarios

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help="output root (sets LAB_OUT)")
    ap.add_argument("--workers", type=int, default=1, help="scenarios run in parallel")
    ap.add_argument("--plots", action="store_true")
    args = ap.parse_args()
    if args.out:
        os.environ["LAB_OUT"] = args.out
    cfgs = [load_config(CONFIGS / f"{sid}.ini") for sid in SCENARIOS]
    if args.plots:
        cfgs = [replace(c, plots=True) for c in cfgs]
    reports = run_scenarios(cfgs, args.workers)
    for rep in reports:
        for line in rep.summary_lines():
            print(line)
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
