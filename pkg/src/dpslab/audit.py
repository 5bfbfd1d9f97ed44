"""Internal-stability audit of unity-feedback loops.

Signals: e = r - y, u = C e, y = G (u + w).  The four closed-loop maps share
the uncancelled characteristic polynomial char = Dg Dc + Ng Nc:

    T_er = Dg Dc / char      T_ur = Dg Nc / char
    T_ew = -Ng Dc / char     T_uw = -Ng Nc / char
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import IllPosedLoop
from .simulate import (DEFAULT_CAP, NoiseSpec, PulseSpec, SimResult,
                       derive_seed, linf_truncated, lti_of, make_pulse,
                       simulate_loop)
from .tf import (CANCEL_TOL, STABILITY_MARGIN, RationalTF, RootSet, _root_match,
                 as_tf, is_stable, poly_roots)

MAP_NAMES = ("T_er", "T_ur", "T_ew", "T_uw")


@dataclass(frozen=True)
class FourMaps:
    T_er: RationalTF
    T_ur: RationalTF
    T_ew: RationalTF
    T_uw: RationalTF

    def items(self):
        return [(k, getattr(self, k)) for k in MAP_NAMES]

    @property
    def char(self):
        return self.T_er.den


def four_maps(plant, controller) -> FourMaps:
    G, C = as_tf(plant), as_tf(controller)
    Dg, Ng, Dc, Nc = G.den, G.num, C.den, C.num
    if not G.is_proper() or not C.is_proper():
        raise IllPosedLoop("plant and controller must be proper")
    g_inf = G.num.lead / G.den.lead if G.relative_degree == 0 else 0.0
    c_inf = C.num.lead / C.den.lead if C.relative_degree == 0 else 0.0
    if abs(1.0 + g_inf * c_inf) < 1e-12:
        raise IllPosedLoop("1 + G(inf) C(inf) vanishes")
    ch = Dg * Dc + Ng * Nc
    return FourMaps(RationalTF(Dg * Dc, ch), RationalTF(Dg * Nc, ch),
                    RationalTF(-(Ng * Dc), ch), RationalTF(-(Ng * Nc), ch))


@dataclass(frozen=True)
class Cancellation:
    root: complex
    unstable: bool
    kind: str  # "plant_pole" or "plant_zero"
    partner: complex

    def to_dict(self):
        return {"re": self.root.real, "im": self.root.imag, "abs": abs(self.root),
                "unstable": self.unstable, "kind": self.kind}


def cancellation_detector(plant, controller, tol: float = CANCEL_TOL) -> List[Cancellation]:
    """Plant zeros facing controller poles and plant poles facing controller zeros.

    Pairs are matched one-to-one when |p - q| <= tol (1 + |p|).
    """
    G, C = as_tf(plant), as_tf(controller)
    out = []
    for plant_roots, ctrl_roots, kind in ((G.zeros(), C.poles(), "plant_zero"),
                                          (G.poles(), C.zeros(), "plant_pole")):
        if len(plant_roots) == 0 or len(ctrl_roots) == 0:
            continue
        for i, j in _root_match(np.asarray(plant_roots), np.asarray(ctrl_roots), tol):
            p = complex(plant_roots[i])
            out.append(Cancellation(p, abs(p) >= 1.0 - STABILITY_MARGIN, kind, complex(ctrl_roots[j])))
    out.sort(key=lambda c: (c.kind != "plant_zero", -abs(c.root), c.root.real))
    return out


@dataclass
class ProbeResult:
    probe: NoiseSpec
    diverged: bool
    divergence_step: Optional[int]
    growth_ratio: Optional[float]
    max_u: float
    max_y: float
    max_du: float
    max_dy: float
    sim: SimResult = field(repr=False, default=None)

    def to_dict(self):
        return {"kind": self.probe.kind, "scale": self.probe.scale, "seed": self.probe.seed,
                "injection": self.probe.injection, "diverged": self.diverged,
                "divergence_step": self.divergence_step, "growth_ratio": self.growth_ratio,
                "max_u": self.max_u, "max_y": self.max_y, "max_du": self.max_du, "max_dy": self.max_dy}


@dataclass
class AuditVerdict:
    internally_stable: bool
    closed_loop_roots: Optional[RootSet]
    cancellations: List[Cancellation]
    failing_maps: List[str]
    method: str = "symbolic"
    probes: List[ProbeResult] = field(default_factory=list)

    def unstable_cancellations(self):
        return [c for c in self.cancellations if c.unstable]

    def to_dict(self):
        roots = [] if self.closed_loop_roots is None else [
            {"re": float(r.real), "im": float(r.imag), "abs": float(abs(r))} for r in self.closed_loop_roots.roots]
        return {"internally_stable": self.internally_stable, "roots": roots,
                "cancellations": [c.to_dict() for c in self.cancellations],
                "failing_maps": list(self.failing_maps), "method": self.method,
                "probes": [p.to_dict() for p in self.probes]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        lines = [f"internally stable : {'yes' if self.internally_stable else 'NO'} ({self.method})"]
        if self.closed_loop_roots is not None:
            lines.append("closed-loop roots :")
            for r in self.closed_loop_roots.roots:
                flag = "  <-- outside" if abs(r) >= 1.0 - STABILITY_MARGIN else ""
                lines.append(f"  {r.real:+.8f} {r.imag:+.8f}j   |z| = {abs(r):.8f}{flag}")
        lines.append("cancellations     : " + (", ".join(
            f"{c.root.real:+.6f}{c.root.imag:+.6f}j ({c.kind}, {'unstable' if c.unstable else 'stable'})"
            for c in self.cancellations) or "none"))
        lines.append("failing maps      : " + (", ".join(self.failing_maps) or "none"))
        for p in self.probes:
            lines.append(f"probe {p.probe.kind}({p.probe.scale}) {p.probe.injection}: diverged={p.diverged} "
                         f"step={p.divergence_step} growth={p.growth_ratio} max|du|={p.max_du:.4g}")
        return "\n".join(lines)


def internal_stability(plant, controller) -> AuditVerdict:
    """Verdict from the roots of the uncancelled characteristic polynomial."""
    maps = four_maps(plant, controller)
    ch = maps.char
    roots = poly_roots(ch) if ch.degree >= 1 else RootSet(np.zeros(0, complex), 0.0)
    stable = bool(np.all(np.abs(roots.roots) < 1.0 - STABILITY_MARGIN))
    failing = [name for name, T in maps.items() if not is_stable(T, "after_cancellation")[0]]
    return AuditVerdict(stable, roots, cancellation_detector(plant, controller), failing)


def _deviation(a: SimResult, nominal: SimResult, attr: str) -> float:
    x = getattr(a, attr).samples
    n = min(len(x), len(getattr(nominal, attr)))
    if a.diverged:
        n = min(n, a.divergence_step)
    if n == 0:
        return 0.0
    return float(np.max(np.abs(x[:n] - getattr(nominal, attr).samples[:n])))


def empirical_instability_probe(plant, policy, probes: Sequence[NoiseSpec], horizon: int = 200,
                                cap: float = DEFAULT_CAP, r=None) -> List[ProbeResult]:
    """Run the loop under each probe noise and report both channels.

    ``max_du`` and ``max_dy`` are deviations from the noise-free run over the
    samples before divergence; ``max_u``/``max_y`` are raw maxima over the same
    window.
    """
    if r is None:
        r = make_pulse(PulseSpec(1.0, 10), horizon)
    nominal = simulate_loop(plant, policy, r, NoiseSpec(), horizon, cap)
    out = []
    for pr in probes:
        res = simulate_loop(plant, policy, r, pr, horizon, cap)
        n = res.divergence_step if res.diverged else len(res.u)
        out.append(ProbeResult(pr, res.diverged, res.divergence_step, res.growth_ratio,
                               linf_truncated(res.u.samples[:n]), linf_truncated(res.y.samples[:n]),
                               _deviation(res, nominal, "u"), _deviation(res, nominal, "y"), res))
    return out


def default_probes(seed: int = 0, sigma: float = 0.1) -> List[NoiseSpec]:
    return [NoiseSpec("gaussian", sigma, derive_seed(seed, 0), "at_control_u"),
            NoiseSpec("gaussian", sigma, derive_seed(seed, 1), "at_reference_r")]


def audit_policy(plant, policy, probes: Sequence[NoiseSpec] = None, horizon: int = 200,
                 cap: float = DEFAULT_CAP) -> AuditVerdict:
    """Symbolic audit for LTI policies, empirical probes otherwise.

    A nonlinear policy is declared internally unstable when any probe run
    diverges; the failing maps are named after the excited channel.
    """
    C = lti_of(policy)
    if C is not None:
        v = internal_stability(plant, C)
        if probes:
            v.probes = empirical_instability_probe(plant, C, probes, horizon, cap)
        return v
    probes = default_probes() if probes is None else list(probes)
    results = empirical_instability_probe(plant, policy, probes, horizon, cap)
    failing = []
    for p in results:
        if p.diverged:
            names = ("T_ew", "T_uw") if p.probe.injection == "at_control_u" else ("T_er", "T_ur")
            failing.extend(n for n in names if n not in failing)
    return AuditVerdict(not failing, None, [], failing, "empirical", results)


def ensemble_growth(plant, policy, probe: NoiseSpec, channel: str = "u", horizon: int = 2000,
                    seeds: int = 16, r=None, cap: float = DEFAULT_CAP) -> float:
    """Ratio of late to early ensemble RMS of a channel's deviation from nominal.

    Windows are the last tenth of the horizon and samples [h/20, 3h/20).  A
    bounded stationary response gives a ratio near 1; a marginal mode driven
    by white noise grows like sqrt(k), giving a ratio near 3.  Divergence
    returns inf.
    """
    if r is None:
        r = make_pulse(PulseSpec(1.0, 10), horizon)
    nominal = simulate_loop(plant, policy, r, NoiseSpec(), horizon, cap, fast=True)
    base = getattr(nominal, channel).samples
    acc = np.zeros(horizon)
    for s in range(seeds):
        res = simulate_loop(plant, policy, r, probe.with_seed(derive_seed(probe.seed, s)), horizon, cap, fast=True)
        if res.diverged:
            return math.inf
        d = getattr(res, channel).samples - base
        acc += d * d
    acc /= seeds
    early = acc[horizon // 20: 3 * horizon // 20].mean()
    late = acc[-horizon // 10:].mean()
    if early <= 0:
        return math.inf if late > 0 else 1.0
    return float(math.sqrt(late / early))
