"""Randomized property suites for the factorization and audit machinery.

Each suite returns a dict of measured worst cases so callers can both assert
and report them.
"""
from __future__ import annotations

import numpy as np

from .audit import cancellation_detector, four_maps, internal_stability
from .simulate import NoiseSpec, PulseSpec, filter_signal, make_pulse, simulate_loop
from .statespace import (closed_loop_generator, coprime_from_ss, h2_norm_gramian,
                         lft_lower, stabilizing_gains, tf_to_ss)
from .tf import Polynomial, RationalTF, impulse_l2, is_stable, l2_norm
from .youla import first_order_factors, youla_controller

UNIT_SAMPLES = np.exp(2j * np.pi * (np.arange(64) + 0.5) / 64)


def random_roots(rng, n: int, rmax: float, rmin: float = 0.0):
    """n real-coefficient roots (conjugate pairs or reals) with rmin <= |z| <= rmax."""
    out = []
    while len(out) < n:
        rad = rng.uniform(rmin, rmax)
        if n - len(out) >= 2 and rng.random() < 0.5:
            th = rng.uniform(0.1, np.pi - 0.1)
            out += [rad * np.exp(1j * th), rad * np.exp(-1j * th)]
        else:
            out.append(rad * rng.choice([-1.0, 1.0]))
    return out


def random_tf(rng, n: int, rel_deg: int = 1, pole_radius=(0.0, 0.9), zero_radius=(0.0, 1.5)) -> RationalTF:
    den = Polynomial.from_roots(random_roots(rng, n, pole_radius[1], pole_radius[0]))
    nz = max(0, n - rel_deg)
    num = Polynomial.from_roots(random_roots(rng, nz, zero_radius[1], zero_radius[0]), rng.uniform(0.5, 2.0))
    return RationalTF(num, den)


def random_stabilizable_plant(rng, n: int) -> RationalTF:
    """Strictly proper plant with poles anywhere in |z| < 2 and zeros kept off its poles."""
    while True:
        G = random_tf(rng, n, 1, (0.0, 2.0), (0.0, 1.5))
        if G.num.degree == 0:
            return G
        d = np.min(np.abs(G.poles()[:, None] - G.zeros()[None, :]))
        if d > 0.05:
            return G


def appendix_properties(seed: int = 0) -> dict:
    """Worst cases for the Bezout, inner-norm, LFT-affinity and Youla-audit checks."""
    rng = np.random.default_rng(seed)
    out = {}
    out["bezout_first_order"] = max(first_order_factors(a).bezout_residual() for a in (1.05, 1.1, 1.5, 2.0))

    worst, worst_plant = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        G = random_stabilizable_plant(rng, n)
        ss = tf_to_ss(G)
        gains = stabilizing_gains(ss, random_roots(rng, n, 0.8), random_roots(rng, n, 0.8))
        cf = coprime_from_ss(ss, gains)
        worst = max(worst, cf.bezout_residual())
        z = UNIT_SAMPLES * 1.7
        worst_plant = max(worst_plant, float(np.max(np.abs(cf.plant().freqresp(z) - G.freqresp(z))
                                                    / np.maximum(1.0, np.abs(G.freqresp(z))))))
    out["bezout_state_space"] = worst
    out["coprime_plant_match"] = worst_plant

    a = 1.1
    M = RationalTF([1.0, -a], [a, -1.0])
    worst = 0.0
    for _ in range(50):
        f = random_tf(rng, int(rng.integers(1, 6)), int(rng.integers(0, 2)), (0.0, 0.9), (0.0, 1.5))
        worst = max(worst, abs(l2_norm(M * f) - l2_norm(f)))
    out["inner_norm_preservation"] = worst

    worst_aff, worst_t = 0.0, 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        G = random_stabilizable_plant(rng, n)
        ss = tf_to_ss(G)
        gains = stabilizing_gains(ss, random_roots(rng, n, 0.8), random_roots(rng, n, 0.8))
        T = closed_loop_generator(ss, gains)
        Q1 = random_tf(rng, int(rng.integers(0, 4)), 0)
        Q2 = random_tf(rng, int(rng.integers(0, 4)), 0)
        z = UNIT_SAMPLES * 1.3
        lhs = lft_lower(T, 0.5 * (Q1 + Q2)).freqresp(z)
        rhs = 0.5 * (lft_lower(T, Q1).freqresp(z) + lft_lower(T, Q2).freqresp(z))
        worst_aff = max(worst_aff, float(np.max(np.abs(lhs - rhs))))
        direct = (T.entry(1, 1).freqresp(z) + T.entry(1, 2).freqresp(z) * Q1.freqresp(z) * T.entry(2, 1).freqresp(z))
        worst_t = max(worst_t, float(np.max(np.abs(lft_lower(T, Q1).freqresp(z) - direct))))
    out["lft_affinity"] = worst_aff
    out["lft_closed_form"] = worst_t

    cf = first_order_factors(1.1)
    G = RationalTF([1.0], [1.0, -1.1])
    unstable = 0
    for _ in range(50):
        Q = random_tf(rng, int(rng.integers(0, 4)), 0)
        if not internal_stability(G, youla_controller(cf, Q)).internally_stable:
            unstable += 1
    out["youla_unstable_count"] = unstable
    return out


def random_pair(rng):
    """Plant of degree 1..3 and proper controller of degree 0..3, sometimes with a forced cancellation."""
    G = random_tf(rng, int(rng.integers(1, 4)), 1, (0.0, 1.5), (0.0, 1.5))
    nc = int(rng.integers(0, 4))
    zc = random_roots(rng, nc, 1.5) if nc else []
    pc = random_roots(rng, nc, 1.5) if nc else []
    u = rng.random()
    if nc and u < 0.25:
        real_poles = [p for p in G.poles() if abs(p.imag) == 0]
        if real_poles:
            zc = [float(real_poles[0].real)] + [z for z in zc if abs(np.imag(z)) == 0][: nc - 1]
            zc += [0.3] * (nc - len(zc))
    elif nc and u < 0.4 and G.num.degree:
        real_zeros = [z for z in G.zeros() if abs(z.imag) == 0]
        if real_zeros:
            pc = [float(real_zeros[0].real)] + [p for p in pc if abs(np.imag(p)) == 0][: nc - 1]
            pc += [0.2] * (nc - len(pc))
    C = RationalTF(Polynomial.from_roots(zc, rng.uniform(0.2, 2.0)), Polynomial.from_roots(pc))
    return G, C


def oracle_equivalences(seed: int = 0) -> dict:
    """Worst cases for norm, four-map and verdict-definition agreement."""
    rng = np.random.default_rng(seed)
    out = {}
    worst = 0.0
    for _ in range(50):
        f = random_tf(rng, int(rng.integers(1, 5)), int(rng.integers(0, 2)), (0.0, 0.95))
        g = h2_norm_gramian(tf_to_ss(f))
        worst = max(worst, abs(g - impulse_l2(f)) / max(1.0, g))
    out["gramian_vs_impulse"] = worst

    worst = 0.0
    checked = 0
    H = 150
    r = make_pulse(PulseSpec(1.0, 10), H)
    while checked < 30:
        G, C = random_pair(rng)
        if not internal_stability(G, C).internally_stable:
            continue
        if max(abs(p) for p in internal_stability(G, C).closed_loop_roots.roots) > 0.97:
            continue
        checked += 1
        noise = NoiseSpec("gaussian", 0.1, int(rng.integers(1 << 30)), "at_control_u")
        sim = simulate_loop(G, C, r, noise, H)
        maps = four_maps(G, C)
        e = filter_signal(maps.T_er, r).samples + filter_signal(maps.T_ew, sim.w).samples
        u = filter_signal(maps.T_ur, r).samples + filter_signal(maps.T_uw, sim.w).samples
        scale = max(1.0, float(np.max(np.abs(e))), float(np.max(np.abs(u))))
        worst = max(worst, float(np.max(np.abs(e - sim.e.samples))) / scale,
                    float(np.max(np.abs(u - sim.u.samples))) / scale)
    out["four_maps_vs_simulation"] = worst

    mismatches = 0
    forced = 0
    for _ in range(100):
        G, C = random_pair(rng)
        v = internal_stability(G, C)
        maps = four_maps(G, C)
        maps_ok = all(is_stable(T, "after_cancellation")[0] for _, T in maps.items())
        canc = cancellation_detector(G, C)
        forced += any(c.unstable for c in canc)
        definition = maps_ok and not any(c.unstable for c in canc)
        mismatches += int(definition != v.internally_stable)
    out["verdict_mismatches"] = mismatches
    out["pairs_with_unstable_cancellation"] = forced
    return out
