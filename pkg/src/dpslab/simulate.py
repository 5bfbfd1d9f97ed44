"""Signals, seeded noise and closed-loop simulation.

The loop is the unity-feedback tracking loop

    e_k = r_k - y_k,   u_k = policy(e_<=k, u_<k),   y = G (u + w)

with the disturbance w added either at the plant input or at the reference.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import BadHorizon, Improper, IllPosedLoop, NoGrowth
from .tf import RationalTF, as_tf

DEFAULT_CAP = 1e6
GROWTH_WINDOW = 20


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    origin: int = 0

    def __post_init__(self):
        a = np.array(self.samples, dtype=float).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    def __len__(self):
        return self.samples.size

    def __getitem__(self, k):
        return self.samples[k]

    def __add__(self, other):
        return Signal(self.samples + np.asarray(other.samples if isinstance(other, Signal) else other), self.origin)

    def __rmul__(self, alpha):
        return Signal(alpha * self.samples, self.origin)

    def tolist(self):
        return self.samples.tolist()


def as_signal(x) -> Signal:
    return x if isinstance(x, Signal) else Signal(x)


@dataclass(frozen=True)
class PulseSpec:
    r0: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"pulse width must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r0", float(self.r0))


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded disturbance; ``scale`` is sigma for gaussian, amplitude for binary."""

    kind: str = "none"
    scale: float = 0.0
    seed: int = 0
    injection: str = "at_control_u"

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "binary"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.injection not in ("at_control_u", "at_reference_r"):
            raise ValueError(f"unknown injection point {self.injection!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be non-negative")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.scale > 0

    def with_seed(self, seed: int) -> "NoiseSpec":
        return NoiseSpec(self.kind, self.scale, int(seed), self.injection)


@dataclass
class SimResult:
    r: Signal
    e: Signal
    u: Signal
    y: Signal
    w: Signal
    diverged: bool = False
    divergence_step: Optional[int] = None
    growth_ratio: Optional[float] = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "r", "w", "e", "u", "y"])
            for k in range(len(self.e)):
                wr.writerow([k] + [repr(float(s[k])) for s in (self.r, self.w, self.e, self.u, self.y)])


def make_pulse(spec: PulseSpec, horizon: int) -> Signal:
    """r_k = r0 for 0 <= k < n, zero afterwards."""
    if horizon < spec.n:
        raise BadHorizon(f"horizon {horizon} shorter than pulse width {spec.n}")
    r = np.zeros(horizon)
    r[: spec.n] = spec.r0
    return Signal(r)


def derive_seed(base: int, *keys: int) -> int:
    """Independent 63-bit seed for a (base, keys...) tuple."""
    ss = np.random.SeedSequence([int(base) & (2**64 - 1)] + [int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _uniforms(seed: int, count: int) -> np.ndarray:
    """Uniforms in (0, 1) from the Philox4x64 counter stream keyed by seed."""
    bits = np.random.Philox(key=int(seed) & (2**64 - 1)).random_raw(count)
    return ((bits >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def noise_sequence(spec: NoiseSpec, length: int) -> np.ndarray:
    """Deterministic noise draw; identical specs give bit-identical output."""
    if not spec.active:
        return np.zeros(length)
    if spec.kind == "binary":
        u = _uniforms(spec.seed, length)
        return np.where(u < 0.5, -spec.scale, spec.scale)
    m = (length + 1) // 2
    u = _uniforms(spec.seed, 2 * m)
    rad = np.sqrt(-2.0 * np.log(u[:m]))
    ang = 2.0 * np.pi * u[m:]
    g = np.empty(2 * m)
    g[0::2] = rad * np.cos(ang)
    g[1::2] = rad * np.sin(ang)
    return spec.scale * g[:length]


def _ba(f: RationalTF):
    """lfilter coefficients in powers of z^-1."""
    f = as_tf(f)
    if not f.is_proper():
        raise Improper("improper transfer function cannot be filtered causally")
    n = f.den.degree
    b = np.pad(f.num.coeffs, (n - f.num.degree, 0)) if not f.num.is_zero() else np.zeros(n + 1)
    return b, f.den.coeffs


def filter_signal(f: RationalTF, x) -> Signal:
    """Zero-state response of f to x, den(f) y = num(f) x."""
    b, a = _ba(f)
    x = as_signal(x)
    return Signal(lfilter(b, a, x.samples), x.origin)


filter = filter_signal


def l2_truncated(s) -> float:
    a = as_signal(s).samples
    return float(np.sqrt(np.dot(a, a)))


def linf_truncated(s) -> float:
    a = as_signal(s).samples
    return float(np.max(np.abs(a))) if a.size else 0.0


def growth_rate(s, window: int = GROWTH_WINDOW) -> float:
    """exp of the least-squares slope of log|s_k| over the last ``window`` samples."""
    if window < 4:
        raise ValueError("growth window must be at least 4")
    a = as_signal(s).samples[-window:]
    k = np.arange(a.size, dtype=float)
    mask = np.abs(a) > 0
    if mask.sum() < 2:
        raise NoGrowth("signal tail is zero")
    slope = np.polyfit(k[mask], np.log(np.abs(a[mask])), 1)[0]
    return float(math.exp(slope))


class LTIStepper:
    """Sample-by-sample realization of a proper rational map e -> u."""

    __slots__ = ("b", "a", "xe", "xu")

    def __init__(self, f: RationalTF):
        b, a = _ba(f)
        a0 = a[0]
        self.b = [float(c / a0) for c in b]
        self.a = [float(c / a0) for c in a[1:]]
        self.xe = [0.0] * (len(self.b) - 1)
        self.xu = [0.0] * len(self.a)

    def __call__(self, e: float) -> float:
        b, a, xe, xu = self.b, self.a, self.xe, self.xu
        u = b[0] * e
        for i in range(len(xe)):
            u += b[i + 1] * xe[i] - a[i] * xu[i]
        if xe:
            xe.pop()
            xe.insert(0, e)
            xu.pop()
            xu.insert(0, u)
        return u


def stepper_for(policy) -> Callable[[float], float]:
    """Fresh zero-state stepper for a RationalTF or a policy object."""
    if isinstance(policy, RationalTF):
        return LTIStepper(policy)
    return policy.stepper()


def lti_of(policy) -> Optional[RationalTF]:
    if isinstance(policy, RationalTF):
        return policy
    tf = getattr(policy, "transfer_function", None)
    return tf() if tf is not None else None


def _finish(r, e, u, y, w, cap, horizon):
    ya = np.asarray(y)
    over = np.flatnonzero(~(np.abs(ya) <= cap))
    diverged = bool(over.size)
    step = int(over[0]) if diverged else None
    cut = step + 1 if diverged else horizon
    res = SimResult(Signal(r[:cut]), Signal(e[:cut]), Signal(u[:cut]), Signal(ya[:cut]), Signal(w[:cut]),
                    diverged, step)
    if diverged:
        pre = ya[:step]
        try:
            res.growth_ratio = growth_rate(pre[np.isfinite(pre)], min(GROWTH_WINDOW, max(4, step)))
        except (NoGrowth, ValueError):
            res.growth_ratio = None
    return res


def simulate_loop(plant: RationalTF, policy, r, noise: NoiseSpec = NoiseSpec(), horizon: Optional[int] = None,
                  cap: float = DEFAULT_CAP, fast: bool = False) -> SimResult:
    """Run the tracking loop for ``horizon`` samples (default: length of r).

    ``fast`` evaluates LTI policies with lfilter on the uncancelled closed-loop
    polynomials instead of stepping; both paths agree to rounding.
    """
    plant = as_tf(plant)
    if not plant.is_strictly_proper():
        raise IllPosedLoop("plant must be strictly proper for the sample-by-sample loop")
    r = as_signal(r).samples
    horizon = r.size if horizon is None else int(horizon)
    if r.size < horizon:
        r = np.pad(r, (0, horizon - r.size))
    r = r[:horizon]
    w = noise_sequence(noise, horizon)
    at_u = noise.injection == "at_control_u"
    if fast:
        C = lti_of(policy)
        if C is not None:
            return _fast_loop(plant, C, r, w, at_u, cap, horizon)

    b, a = _ba(plant)
    a0 = a[0]
    pb = [float(c / a0) for c in b[1:]]  # b[0] == 0, strictly proper
    pa = [float(c / a0) for c in a[1:]]
    nd = len(pa)
    xv = [0.0] * nd  # past plant inputs, most recent first
    xy = [0.0] * nd
    step = stepper_for(policy)
    e = np.zeros(horizon)
    u = np.zeros(horizon)
    y = np.zeros(horizon)
    rl = r.tolist()
    wl = w.tolist()
    for k in range(horizon):
        yk = 0.0
        for i in range(nd):
            yk += pb[i] * xv[i] - pa[i] * xy[i]
        ek = (rl[k] - yk) if at_u else (rl[k] + wl[k] - yk)
        uk = step(ek)
        vk = uk + wl[k] if at_u else uk
        y[k], e[k], u[k] = yk, ek, uk
        if not math.isfinite(uk):
            y[k] = math.inf
        if not (abs(y[k]) <= cap):
            return _finish(r, e, u, y, w, cap, horizon)
        if nd:
            xv.pop()
            xv.insert(0, vk)
            xy.pop()
            xy.insert(0, yk)
    return _finish(r, e, u, y, w, cap, horizon)


def simulate_batch(plant: RationalTF, policy, R: np.ndarray, W: np.ndarray, at_u: bool = True):
    """Vectorized loop over the rows of R (references) and W (noises).

    Requires ``policy.batch_stepper(rows)``; returns (E, U, Y) arrays.  Rows
    keep running after exceeding any cap, callers decide on divergence.
    """
    plant = as_tf(plant)
    if not plant.is_strictly_proper():
        raise IllPosedLoop("plant must be strictly proper for the sample-by-sample loop")
    b, a = _ba(plant)
    pb = b[1:] / a[0]
    pa = a[1:] / a[0]
    nd = pa.size
    P, H = R.shape
    xv = np.zeros((nd, P))
    xy = np.zeros((nd, P))
    step = policy.batch_stepper(P)
    E = np.empty((H, P))
    U = np.empty((H, P))
    Y = np.empty((H, P))
    Rt, Wt = R.T, W.T
    for k in range(H):
        y = pb @ xv - pa @ xy if nd else np.zeros(P)
        e = Rt[k] - y if at_u else Rt[k] + Wt[k] - y
        u = step(e)
        if nd:
            xv[1:] = xv[:-1]
            xv[0] = u + Wt[k] if at_u else u
            xy[1:] = xy[:-1]
            xy[0] = y
        E[k], U[k], Y[k] = e, u, y
    return E.T, U.T, Y.T


def loop_polynomials(plant: RationalTF, C: RationalTF):
    """(Dg, Ng, Dc, Nc, char) with char = Dg Dc + Ng Nc, nothing cancelled."""
    plant, C = as_tf(plant), as_tf(C)
    Dg, Ng, Dc, Nc = plant.den, plant.num, C.den, C.num
    return Dg, Ng, Dc, Nc, Dg * Dc + Ng * Nc


def _fast_loop(plant, C, r, w, at_u, cap, horizon):
    Dg, Ng, Dc, Nc, ch = loop_polynomials(plant, C)
    if ch.is_zero():
        raise IllPosedLoop("characteristic polynomial vanishes")
    Ser = RationalTF(Dg * Dc, ch)
    if at_u:
        e = filter_signal(Ser, r).samples - filter_signal(RationalTF(Ng * Dc, ch), w).samples
    else:
        e = filter_signal(Ser, r + w).samples
    u = filter_signal(C, e).samples
    y = (r - e) if at_u else (r + w - e)
    return _finish(r, e, u, y, w, cap, horizon)
