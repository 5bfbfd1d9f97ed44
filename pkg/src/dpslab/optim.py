"""Nelder-Mead simplex search with restarts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from .errors import BadStart


@dataclass(frozen=True)
class NelderMeadConfig:
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    max_iters: int = 5000
    restarts: int = 3
    initial_step: float = 0.5
    restart_step_scale: float = 0.1

    def __post_init__(self):
        if self.x_tol <= 0 or self.f_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.restarts < 0 or self.initial_step <= 0:
            raise ValueError("invalid Nelder-Mead budget")


@dataclass
class NMResult:
    x: np.ndarray
    f: float
    trace: List[float] = field(default_factory=list)
    iterations: int = 0
    evaluations: int = 0
    converged: bool = False

    def __iter__(self):
        # unpacks as (x, f, trace)
        return iter((self.x, self.f, self.trace))


def _simplex_around(x0: np.ndarray, step: float) -> np.ndarray:
    d = x0.size
    S = np.tile(x0, (d + 1, 1))
    for i in range(d):
        h = step * max(1.0, abs(x0[i])) if step > 0 else 0.05
        S[i + 1, i] += h
    return S


def _run(f, S: np.ndarray, F: np.ndarray, cfg: NelderMeadConfig, budget: int, trace: list):
    d = S.shape[1]
    it = 0
    nfev = 0
    converged = False
    while it < budget:
        order = np.argsort(F, kind="stable")
        S, F = S[order], F[order]
        diam = float(np.max(np.abs(S[1:] - S[0]))) if d else 0.0
        if diam < cfg.x_tol and (F[-1] - F[0]) < cfg.f_tol:
            converged = True
            break
        it += 1
        centroid = S[:-1].mean(axis=0)
        xr = centroid + (centroid - S[-1])
        fr = f(xr)
        nfev += 1
        if fr < F[0]:
            xe = centroid + 2.0 * (centroid - S[-1])
            fe = f(xe)
            nfev += 1
            if fe < fr:
                S[-1], F[-1] = xe, fe
            else:
                S[-1], F[-1] = xr, fr
        elif fr < F[-2]:
            S[-1], F[-1] = xr, fr
        else:
            if fr < F[-1]:
                xc = centroid + 0.5 * (xr - centroid)  # outside contraction
                fc = f(xc)
                nfev += 1
                accept = fc <= fr
            else:
                xc = centroid + 0.5 * (S[-1] - centroid)  # inside contraction
                fc = f(xc)
                nfev += 1
                accept = fc < F[-1]
            if accept:
                S[-1], F[-1] = xc, fc
            else:
                for i in range(1, d + 1):
                    S[i] = S[0] + 0.5 * (S[i] - S[0])
                    F[i] = f(S[i])
                    nfev += 1
        trace.append(float(np.min(F)))
    order = np.argsort(F, kind="stable")
    return S[order], F[order], it, nfev, converged


def nelder_mead(objective: Callable[[np.ndarray], float], x0, cfg: NelderMeadConfig = NelderMeadConfig(),
                step: float = None) -> NMResult:
    """Minimize ``objective`` from ``x0``; returns (x*, f*, trace) as an NMResult.

    Each restart rebuilds the simplex around the incumbent with a step of
    ``restart_step_scale * initial_step``.  Non-finite values are treated as +inf
    except at the start point, which must be finite.
    """
    x0 = np.array(x0, dtype=float).ravel()

    def f(x):
        v = float(objective(np.array(x)))
        return v if math.isfinite(v) else math.inf

    f0 = f(x0)
    if not math.isfinite(f0):
        raise BadStart("objective is not finite at the start point")
    step = cfg.initial_step if step is None else step
    S = _simplex_around(x0, step)
    F = np.array([f0] + [f(s) for s in S[1:]])
    trace: list = []
    total_it, total_ev = 0, len(F)
    converged = False
    for k in range(cfg.restarts + 1):
        budget = cfg.max_iters - total_it
        if budget <= 0:
            break
        S, F, it, ev, converged = _run(f, S, F, cfg, budget, trace)
        total_it += it
        total_ev += ev
        if k < cfg.restarts:
            best_x, best_f = S[0].copy(), F[0]
            S = _simplex_around(best_x, step * cfg.restart_step_scale)
            F = np.array([best_f] + [f(s) for s in S[1:]])
            total_ev += len(F) - 1
    i = int(np.argmin(F))
    x, fx = S[i], float(F[i])
    if fx > f0:
        x, fx = x0, f0
    return NMResult(x, fx, trace, total_it, total_ev, converged)
