"""Model-agnostic direct policy search on pulse-tracking losses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from .errors import SearchFailed
from .optim import NelderMeadConfig, NMResult, nelder_mead
from .policies import (Composite, Neural, NeuralStaticGain, Policy, PoleZero,
                       StaticGain)
from .simulate import (DEFAULT_CAP, NoiseSpec, PulseSpec, derive_seed,
                       filter_signal, l2_truncated, loop_polynomials, lti_of,
                       noise_sequence, simulate_batch, simulate_loop)
from .tf import RationalTF, as_tf, is_stable

DEFAULT_PULSES = tuple(PulseSpec(r0, n) for r0 in (1.0, -1.0, 0.5) for n in (5, 10, 20))


@dataclass(frozen=True)
class LossSpec:
    """Training objective: sum over pulses of ||e||/|r0| + lambda ||u||.

    ``warmup_horizons`` lists shorter horizons optimized first, each stage
    warm-starting the next; pulses wider than a stage horizon are truncated.
    """

    training_pulses: Tuple[PulseSpec, ...] = DEFAULT_PULSES
    noise: NoiseSpec = NoiseSpec()
    horizon: int = 100
    control_penalty: float = 0.0
    normalize_by_r0: bool = True
    diverged_cost: float = 1e4
    cap: float = DEFAULT_CAP
    warmup_horizons: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "training_pulses", tuple(self.training_pulses))
        object.__setattr__(self, "warmup_horizons", tuple(int(h) for h in self.warmup_horizons))
        if not self.training_pulses:
            raise ValueError("at least one training pulse is required")
        if self.control_penalty < 0:
            raise ValueError("control penalty must be non-negative")
        if self.horizon < 1 or any(h < 1 for h in self.warmup_horizons):
            raise ValueError("horizons must be positive")

    def with_horizon(self, h: int) -> "LossSpec":
        return LossSpec(self.training_pulses, self.noise, h, self.control_penalty, self.normalize_by_r0,
                        self.diverged_cost, self.cap, ())


def _loss_inputs(spec: LossSpec, run: int):
    """Reference and noise matrices, one row per training pulse."""
    H = spec.horizon
    R = np.zeros((len(spec.training_pulses), H))
    W = np.zeros_like(R)
    for i, p in enumerate(spec.training_pulses):
        R[i, : min(p.n, H)] = p.r0
        if spec.noise.active:
            W[i] = noise_sequence(spec.noise.with_seed(derive_seed(spec.noise.seed, run, i)), H)
    return R, W


def _row_costs(spec: LossSpec, E, U, Y) -> float:
    total = 0.0
    for i, p in enumerate(spec.training_pulses):
        y = Y[i]
        if not np.all(np.abs(y) <= spec.cap) or not np.all(np.isfinite(U[i])):
            total += spec.diverged_cost
            continue
        cost = float(np.sqrt(np.dot(E[i], E[i])))
        if spec.normalize_by_r0:
            cost /= abs(p.r0)
        cost += spec.control_penalty * float(np.sqrt(np.dot(U[i], U[i])))
        total += cost if math.isfinite(cost) else spec.diverged_cost
    return total


def evaluate_loss(policy, plant: RationalTF, spec: LossSpec, run: int = 0) -> float:
    """Deterministic loss; the noise for pulse i uses seed (noise.seed, run, i).

    LTI policies are filtered in one batch over the uncancelled closed-loop
    polynomials; other policies go through the sample-by-sample loop.
    """
    plant = as_tf(plant)
    R, W = _loss_inputs(spec, run)
    at_u = spec.noise.injection == "at_control_u"
    C = lti_of(policy)
    with np.errstate(all="ignore"):
        if C is not None:
            Dg, Ng, Dc, Nc, ch = loop_polynomials(plant, C)
            n = ch.degree
            a = ch.coeffs
            bS = np.pad((Dg * Dc).coeffs, (n - (Dg * Dc).degree, 0))
            if at_u:
                bW = np.pad((Ng * Dc).coeffs, (n - (Ng * Dc).degree, 0))
                E = lfilter(bS, a, R, axis=1) - lfilter(bW, a, W, axis=1)
                Y = R - E
            else:
                E = lfilter(bS, a, R + W, axis=1)
                Y = R + W - E
            cb = np.pad(Nc.coeffs, (Dc.degree - Nc.degree, 0))
            U = lfilter(cb, Dc.coeffs, E, axis=1)
            return _row_costs(spec, E, U, Y)
        if hasattr(policy, "batch_stepper"):
            E, U, Y = simulate_batch(plant, policy, R, W, at_u)
            return _row_costs(spec, E, U, Y)
        total = 0.0
        for i, p in enumerate(spec.training_pulses):
            noise = spec.noise.with_seed(derive_seed(spec.noise.seed, run, i)) if spec.noise.active else spec.noise
            res = simulate_loop(plant, policy, R[i], noise, spec.horizon, spec.cap)
            total += _row_costs(LossSpec((p,), spec.noise, len(res.e), spec.control_penalty, spec.normalize_by_r0,
                                         spec.diverged_cost, spec.cap),
                                res.e.samples[None], res.u.samples[None], res.y.samples[None])
        return total


@dataclass
class TrainingTrace:
    best_cost: List[float] = field(default_factory=list)
    stage_ends: List[int] = field(default_factory=list)
    stage_horizons: List[int] = field(default_factory=list)
    start: Optional[np.ndarray] = None
    final_cost: float = math.nan

    def to_rows(self):
        return [(i, c) for i, c in enumerate(self.best_cost)]


def default_start(template: Policy, seed: int, scale: float = 0.3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = template.to_vector()
    return x + scale * rng.standard_normal(x.size)


def train_policy(template: Policy, plant: RationalTF, spec: LossSpec,
                 cfg: NelderMeadConfig = NelderMeadConfig(), seed: int = 0,
                 x0=None, init_scale: float = 0.3, warm_step_scale: float = 0.1):
    """Nelder-Mead over the parameters of ``template``.

    The start is ``template`` perturbed by N(0, init_scale^2) draws from ``seed``
    unless ``x0`` is given.  Returns ``(policy, TrainingTrace)``.
    """
    x = default_start(template, seed, init_scale) if x0 is None else np.array(x0, dtype=float)
    trace = TrainingTrace(start=x.copy())
    horizons = [h for h in spec.warmup_horizons if h < spec.horizon] + [spec.horizon]
    res: NMResult = None
    for k, h in enumerate(horizons):
        stage = spec.with_horizon(h)

        def objective(v, stage=stage):
            return evaluate_loss(template.from_vector(v), plant, stage, run=seed)

        step = cfg.initial_step if k == 0 else cfg.initial_step * warm_step_scale
        res = nelder_mead(objective, x, cfg, step=step)
        x = res.x
        trace.best_cost.extend(res.trace)
        trace.stage_ends.append(len(trace.best_cost))
        trace.stage_horizons.append(h)
    trace.final_cost = res.f
    if res.f >= spec.diverged_cost * len(spec.training_pulses):
        raise SearchFailed("every simulation diverged during the search")
    return template.from_vector(x), trace


def _prestab_cost(policy: Policy, plant: RationalTF, horizon: int, diverged_cost: float, cap: float) -> float:
    plant = as_tf(plant)
    tf = policy.transfer_function()
    if isinstance(policy, NeuralStaticGain):
        slopes = policy.slopes()
    elif tf is not None:
        slopes = None
    else:
        raise ValueError("prestabilizer must be a static map")
    impulse = np.zeros(horizon)
    impulse[0] = 1.0
    if slopes is None:
        S = RationalTF(1.0).feedback(plant * tf)
        if not is_stable(S)[0]:
            return diverged_cost
        return l2_truncated(filter_signal(S, impulse))
    for k in slopes:
        if not is_stable(RationalTF(1.0).feedback(plant * k))[0]:
            return diverged_cost
    total = 0.0
    for sgn in (1.0, -1.0):
        res = simulate_loop(plant, policy, sgn * impulse, NoiseSpec(), horizon, cap)
        if res.diverged:
            return diverged_cost
        total += l2_truncated(res.e)
    return 0.5 * total


def prestabilize(plant: RationalTF, variant="StaticGain", cfg: NelderMeadConfig = NelderMeadConfig(),
                 horizon: int = 200, diverged_cost: float = 1e4, cap: float = DEFAULT_CAP,
                 hidden: int = 3) -> Policy:
    """Static stabilizing controller minimizing the closed-loop impulse-response norm.

    A coarse scan over gains in [-5, 5] seeds the simplex; the neural variant
    starts from the best static gain split over ``hidden`` ReLU units.
    """
    name = variant if isinstance(variant, str) else variant.kind
    grid = np.linspace(-5.0, 5.0, 201)
    scores = [_prestab_cost(StaticGain(k), plant, horizon, diverged_cost, cap) for k in grid]
    best = int(np.argmin(scores))
    if scores[best] >= diverged_cost:
        raise SearchFailed("no stabilizing static gain on the scan grid")
    k0 = float(grid[best])
    res = nelder_mead(lambda v: _prestab_cost(StaticGain(v[0]), plant, horizon, diverged_cost, cap), [k0], cfg,
                      step=0.05)
    K = float(res.x[0])
    if name == "StaticGain":
        return StaticGain(K)
    if name != "NeuralStaticGain":
        raise ValueError(f"unknown prestabilizer variant {name!r}")
    n_pos = max(1, hidden - 1)
    W1 = np.array([1.0] * n_pos + [-1.0] * (hidden - n_pos))
    W2 = np.array([K / n_pos] * n_pos + [-K / (hidden - n_pos)] * (hidden - n_pos))
    template = NeuralStaticGain(W1, W2)
    res = nelder_mead(lambda v: _prestab_cost(template.from_vector(v), plant, horizon, diverged_cost, cap),
                      template.to_vector(), cfg, step=0.1)
    pol = template.from_vector(res.x)
    if res.f >= diverged_cost:
        raise SearchFailed("neural prestabilizer search found no stabilizing map")
    return pol


def prestabilized_plant(plant: RationalTF, C_ps: Policy) -> RationalTF:
    """G_ps = G / (1 + G C_ps) for an LTI prestabilizer."""
    tf = C_ps.transfer_function()
    if tf is None:
        raise ValueError("prestabilized plant needs an LTI prestabilizer")
    return as_tf(plant).feedback(tf)


def train_composite(plant: RationalTF, C_ps: Policy, spec: LossSpec,
                    cfg: NelderMeadConfig = NelderMeadConfig(), seed: int = 0,
                    template: Policy = None, **kw) -> Tuple[Composite, "TrainingTrace"]:
    """Train an augmentation around G_ps with the pulses as its reference.

    The prestabilized plant absorbs the unstable pole, so the search never
    sees it and cannot place a zero on it.
    """
    G_ps = prestabilized_plant(plant, C_ps)
    if not is_stable(G_ps)[0]:
        raise SearchFailed("prestabilizer does not stabilize the plant")
    if template is None:
        template = Neural(np.zeros((2, 3)), np.zeros((1, 2)))
    aug, trace = train_policy(template, G_ps, spec, cfg, seed=seed, **kw)
    return Composite(C_ps, aug), trace
