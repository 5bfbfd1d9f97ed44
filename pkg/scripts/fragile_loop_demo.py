#!/usr/bin/env python3
"""Show the super-optimal controller C1 = (z - a)/(z - 1) beating the optimum and then diverging.

Usage: python3 scripts/fragile_loop_demo.py [a]
"""
import sys

from dpslab.audit import internal_stability
from dpslab.simulate import NoiseSpec, PulseSpec, l2_truncated, make_pulse, simulate_loop
from dpslab.tf import RationalTF
from dpslab.youla import FirstOrderProblem, closed_form_optimum


def main() -> int:
    a = float(sys.argv[1]) if len(sys.argv) > 1 else 1.1
    G = RationalTF([1.0], [1.0, -a])
    C1 = RationalTF([1.0, -a], [1.0, -1.0])
    C = closed_form_optimum(FirstOrderProblem(a=a)).C
    r = make_pulse(PulseSpec(1.0, 10), 200)
    for name, ctrl in (("optimal", C), ("C1", C1)):
        nominal = simulate_loop(G, ctrl, r)
        noisy = simulate_loop(G, ctrl, r, NoiseSpec("gaussian", 0.1, 1), 200)
        v = internal_stability(G, ctrl)
        print(f"{name:8s} ||e|| = {l2_truncated(nominal.e):.6f}  internally stable = {v.internally_stable}  "
              f"noisy run diverged = {noisy.diverged} (step {noisy.divergence_step}, growth {noisy.growth_ratio})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
