#!/usr/bin/env python3
"""Print the worst cases of the coprime/LFT/Youla property suites and the oracle cross-checks.

Usage: python3 scripts/property_suites.py [seed ...]
"""
import json
import sys

from dpslab.properties import appendix_properties, oracle_equivalences


def main() -> int:
    seeds = [int(s) for s in sys.argv[1:]] or [0]
    for seed in seeds:
        out = {"seed": seed, "appendix": appendix_properties(seed), "oracles": oracle_equivalences(seed)}
        print(json.dumps(out, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
