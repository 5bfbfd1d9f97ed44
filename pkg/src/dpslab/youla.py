"""Youla-parameter synthesis for the first-order unstable plant 1/(z - a)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DegenerateController, NotConverged, NotUnstable, PoleHit
from .optim import NelderMeadConfig, nelder_mead
from .statespace import CoprimeFactors, youla_q_for_controller
from .tf import (Polynomial, RationalTF, as_tf, cancel_common_roots, evaluate,
                 l2_norm, tf_from_text)


@dataclass(frozen=True)
class FirstOrderProblem:
    """Plant 1/(z - a) driven by a pulse of amplitude r0 and width n."""

    a: float = 1.1
    r0: float = 1.0
    n: int = 10

    def __post_init__(self):
        if not self.a > 1.0:
            raise NotUnstable(f"plant pole a={self.a} must exceed 1")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"pulse width must be a positive integer, got {self.n}")

    @property
    def plant(self) -> RationalTF:
        return RationalTF([1.0], [1.0, -self.a])

    @property
    def optimal_cost(self) -> float:
        return self.a * abs(self.r0) * math.sqrt(2.0)


def pulse_tf(r0: float, n: int) -> RationalTF:
    """z-transform of the width-n pulse, r0 (z^(n-1) + ... + 1) / z^(n-1)."""
    den = np.zeros(n)
    den[0] = 1.0
    return RationalTF(r0 * np.ones(n), den)


@dataclass(frozen=True)
class OptimalSolution:
    a: float
    r0: float
    n: int
    Q: RationalTF
    Qtilde: RationalTF
    C: RationalTF
    S: RationalTF
    cost: float

    def to_json(self) -> str:
        return json.dumps({"a": self.a, "r0": self.r0, "n": self.n, "Q": self.Q.to_text(),
                           "C": self.C.to_text(), "S": self.S.to_text(), "cost": self.cost})

    @classmethod
    def from_json(cls, text: str) -> "OptimalSolution":
        d = json.loads(text)
        Q = tf_from_text(d["Q"])
        a = float(d["a"])
        return cls(a, float(d["r0"]), int(d["n"]), Q, Q * RationalTF([1.0, 0.0], [a, -1.0]),
                   tf_from_text(d["C"]), tf_from_text(d["S"]), float(d["cost"]))


@dataclass(frozen=True)
class FirQ:
    q: tuple

    def as_tf(self) -> RationalTF:
        """Qtilde = q_0 + q_1 z^-1 + ... as a rational function."""
        m = len(self.q)
        den = np.zeros(m)
        den[0] = 1.0
        return RationalTF(list(self.q), den)


def first_order_factors(a: float) -> CoprimeFactors:
    """N = 1/(az-1), M = (z-a)/(az-1) (all-pass), X = a^2 - 1, Y = a."""
    if not a > 1.0:
        raise NotUnstable(f"a={a} is not an unstable pole")
    d = [a, -1.0]
    return CoprimeFactors(RationalTF([1.0], d), RationalTF([1.0, -a], d),
                          RationalTF(a * a - 1.0), RationalTF(a))


def closed_form_optimum(p: FirstOrderProblem) -> OptimalSolution:
    """Internally stabilizing controller minimizing the tracking error norm."""
    a, r0 = p.a, p.r0
    Q = RationalTF([-a * a, a], [1.0, 0.0])
    Qt = RationalTF(-a)
    C = RationalTF([a * a + a - 1.0, -a * a], [a, -a])
    S = RationalTF(a * (Polynomial([1.0, -a]) * Polynomial([1.0, -1.0])), Polynomial([a, -1.0]) * Polynomial([1.0, 0.0]))
    cost = l2_norm(S * pulse_tf(r0, p.n))
    expected = p.optimal_cost
    if abs(cost - expected) > 1e-9 * max(1.0, expected):
        raise ArithmeticError(f"optimal cost {cost} differs from a r0 sqrt(2) = {expected}")
    if abs(evaluate(S, a)) > 1e-9 or abs(evaluate(S, math.inf) - 1.0) > 1e-9:
        raise ArithmeticError("optimal sensitivity violates its interpolation constraints")
    return OptimalSolution(a, r0, p.n, Q, Qt, C, S, cost)


def _fir_cost(q: np.ndarray, a: float, r0: float, width: int) -> float:
    h = np.concatenate(([a], q)) if q.size else np.array([a])
    if q.size:
        h[1:] = q
    e = r0 * np.convolve(h, np.ones(width))
    return float(np.sqrt(np.dot(e, e)))


def fir_cost(q, p: FirstOrderProblem, width: int = None) -> float:
    """||a R + (R/z) Qtilde||_2 for the FIR Qtilde with taps q and a pulse of given width."""
    q = np.asarray(q, dtype=float)
    return _fir_cost(q, p.a, p.r0, p.n if width is None else width)


def model_match_fir(p: FirstOrderProblem, m: int, mode: str = "worst_case",
                    cfg: NelderMeadConfig = NelderMeadConfig(restarts=3)):
    """FIR model matching over Qtilde = q_0 + ... + q_(m-1) z^-(m-1).

    ``mode="worst_case"`` minimizes the largest cost over all pulse widths.
    A bounded cost for arbitrarily wide pulses forces sum(q) = -a, so one tap
    is eliminated and the widths 1..m+1 together with p.n cover every case;
    the unique minimizer is q = (-a, 0, ..., 0) with cost a |r0| sqrt(2).
    ``mode="fixed_width"`` minimizes the cost of the single width p.n, whose
    minimizer generally differs (m = 1 gives q_0 = -a (n-1)/n).

    Returns ``(FirQ, cost)``.
    """
    if m < 1:
        raise ValueError("FIR order must be at least 1")
    a = p.a
    if mode == "fixed_width":
        def full(x):
            return _fir_cost(np.asarray(x), a, p.r0, p.n)
        x0 = np.zeros(m)
        res = nelder_mead(full, x0, cfg)
        q = res.x
    elif mode == "worst_case":
        # With sum(q) = -a every width >= m + 1 gives the same cost, a strictly
        # convex quadratic in the free taps whose minimizer makes all widths
        # cost a |r0| sqrt(2); minimizing it therefore minimizes the worst case.
        wide = max(m + 1, p.n)

        def expand(x):
            return np.concatenate((x, [-a - np.sum(x)]))

        def objective(x):
            return _fir_cost(expand(np.asarray(x)), a, p.r0, wide)

        if m == 1:
            q, res = np.array([-a]), None
        else:
            res = nelder_mead(objective, np.zeros(m - 1), cfg)
            q = expand(res.x)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if res is not None and not res.converged:
        raise NotConverged("FIR model matching did not converge", best=q)
    if mode == "fixed_width":
        cost = _fir_cost(q, a, p.r0, p.n)
    else:
        cost = max(_fir_cost(q, a, p.r0, w) for w in sorted(set(range(1, m + 2)) | {p.n}))
    return FirQ(tuple(float(v) for v in q)), cost


def q_from_qtilde(Qt: RationalTF, a: float) -> RationalTF:
    """Q = Qtilde (az - 1)/z."""
    return as_tf(Qt) * RationalTF([a, -1.0], [1.0, 0.0])


def youla_controller(cf: CoprimeFactors, Q) -> RationalTF:
    """C = (X - M Q)/(Y + N Q), left uncancelled."""
    Q = as_tf(Q)
    den = cf.Y + cf.N * Q
    if den.num.is_zero():
        raise DegenerateController("Y + N Q vanishes identically")
    return (cf.X - cf.M * Q) / den


def sensitivity_from_q(cf: CoprimeFactors, Q) -> RationalTF:
    """S = M (Y + N Q)."""
    return cf.M * (cf.Y + cf.N * as_tf(Q))


def q_for_controller(cf: CoprimeFactors, C, tol: float = 1e-4) -> RationalTF:
    """Inverse map C -> Q for the same factors (common roots removed).

    The uncancelled form carries the roots of the factor denominators with
    multiplicity up to three, which the root finder resolves only to about
    eps^(1/3); the default ``tol`` is loose enough to pair such clusters.
    """
    Q, _ = cancel_common_roots(youla_q_for_controller(cf, C), tol)
    return Q


@dataclass(frozen=True)
class InterpolationEntry:
    point: complex
    kind: str
    required: float
    actual: complex

    @property
    def residual(self) -> float:
        return abs(self.actual - self.required)

    def satisfied(self, tol: float = 1e-9) -> bool:
        return self.residual <= tol


def _eval_reduced(S: RationalTF, z0):
    try:
        return evaluate(S, z0)
    except PoleHit:
        return evaluate(cancel_common_roots(S)[0], z0)


def interpolation_report(S: RationalTF, plant: RationalTF) -> List[InterpolationEntry]:
    """Constraints an internally stabilizing loop must meet.

    S(p) = 0 at each unstable plant pole, S(z) = 1 at each finite
    non-minimum-phase plant zero, and S(inf) = 1 for a strictly proper plant.
    A 0/0 at a constraint point is resolved after root-pair cancellation.
    """
    S, plant = as_tf(S), as_tf(plant)
    out = []
    for pole in plant.poles():
        if abs(pole) >= 1.0 - 1e-9:
            out.append(InterpolationEntry(complex(pole), "unstable_pole", 0.0, _eval_reduced(S, pole)))
    for zero in plant.zeros():
        if abs(zero) >= 1.0 - 1e-9:
            out.append(InterpolationEntry(complex(zero), "nonminimum_phase_zero", 1.0, _eval_reduced(S, zero)))
    if plant.relative_degree >= 1:
        out.append(InterpolationEntry(complex(math.inf), "infinity", 1.0, evaluate(S, math.inf)))
    return out
