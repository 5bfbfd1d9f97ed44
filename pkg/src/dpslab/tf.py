"""Real polynomials and rational transfer functions in the forward shift z.

Coefficients are stored in descending powers of z.  Nothing in this module
ever cancels a common numerator/denominator factor unless asked to through
:func:`cancel_common_roots` or the ``"after_cancellation"`` stability policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (DegenerateLoop, Diverged, Improper, NoRoots, PoleHit,
                     UnstableNorm)

ROOT_TOL = 1e-10
CANCEL_TOL = 1e-6
STABILITY_MARGIN = 1e-9
MAX_ROOT_ITERS = 200


class Polynomial:
    """Immutable real polynomial, coefficients from highest power down."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable[float]):
        c = np.atleast_1d(np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                                     dtype=float)).ravel()
        if c.size == 0:
            c = np.zeros(1)
        nz = np.flatnonzero(c)
        c = c[nz[0]:].copy() if nz.size else np.zeros(1)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def from_roots(cls, roots: Sequence[complex], gain: float = 1.0) -> "Polynomial":
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, [1.0, -complex(r)])
        return cls(gain * c.real)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0.0

    @property
    def lead(self) -> float:
        return float(self._c[0])

    def __call__(self, z):
        acc = 0.0 * z
        for c in self._c:
            acc = acc * z + c
        return acc

    def derivative(self) -> "Polynomial":
        n = self.degree
        if n == 0:
            return Polynomial([0.0])
        return Polynomial(self._c[:-1] * np.arange(n, 0, -1))

    def scale(self, z) -> float:
        """Sum of |c_k| |z|^k, the natural magnitude for residual tests."""
        az = abs(z)
        acc = 0.0
        for c in self._c:
            acc = acc * az + abs(c)
        return acc

    def __add__(self, other):
        other = _as_poly(other)
        a, b = self._c, other._c
        n = max(a.size, b.size)
        return Polynomial(np.pad(a, (n - a.size, 0)) + np.pad(b, (n - b.size, 0)))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        return Polynomial(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other, rtol=1e-9, atol=1e-12) -> bool:
        other = _as_poly(other)
        return self._c.shape == other._c.shape and np.allclose(self._c, other._c, rtol=rtol, atol=atol)

    def roots(self, tol: float = ROOT_TOL) -> np.ndarray:
        return poly_roots(self, tol).roots

    def __repr__(self):
        return f"Polynomial({self._c.tolist()})"

    def to_text(self) -> str:
        return " ".join(repr(float(c)) for c in self._c)


def _as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    if np.isscalar(p):
        return Polynomial([float(p)])
    return Polynomial(p)


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    residual: float

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def poly_roots(p: Polynomial, tol: float = ROOT_TOL, seed: int = 1234) -> RootSet:
    """All complex roots of ``p`` by Aberth-Ehrlich simultaneous iteration.

    Roots at (or numerically indistinguishable from) the origin are split off
    before iterating.  The initial guesses sit on a circle whose radius matches
    the geometric mean of the root moduli, with small seeded perturbations to
    break symmetry.
    """
    p = _as_poly(p)
    if p.degree < 1:
        raise NoRoots("polynomial of degree 0 has no roots")
    c = p.coeffs
    # roots at zero, including trailing coefficients below eps^degree relative:
    # zeroing those moves every root by about eps at most, while iterating
    # toward roots that small needs hundreds of halving steps
    nz = 0
    negligible = np.finfo(float).eps ** p.degree * np.max(np.abs(c))
    while abs(c[-1 - nz]) <= negligible:
        nz += 1
    core = c[: c.size - nz] / c[0]
    n = core.size - 1
    roots = [0j] * nz
    if n == 0:
        return RootSet(np.array(roots, dtype=complex), 0.0)
    if n == 1:
        roots.append(complex(-core[1]))
        return RootSet(_conj_clean(np.array(roots)), 0.0)

    q = Polynomial(core)
    dq = q.derivative()
    rng = np.random.default_rng(seed)
    radius = abs(core[-1]) ** (1.0 / n)
    radius = max(radius, 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4 + 0.1 * rng.standard_normal(n)
    z = radius * (1.0 + 0.05 * rng.standard_normal(n)) * np.exp(1j * angles)
    z = z - core[1] / n  # centre on the root centroid

    coeffs = core.astype(complex)
    dcoeffs = dq.coeffs.astype(complex)
    absc = np.abs(core)

    def residuals(zz):
        pv = np.polyval(coeffs, zz)
        sc = np.polyval(absc, np.abs(zz))
        return np.abs(pv) / np.where(sc > 0, sc, 1.0)

    converged = False
    for it in range(MAX_ROOT_ITERS):
        pv = np.polyval(coeffs, z)
        dpv = np.polyval(dcoeffs, z)
        max_step = 0.0
        for i in range(n):
            if pv[i] == 0:
                continue
            ratio = pv[i] / dpv[i] if dpv[i] != 0 else np.inf
            diff = z[i] - np.delete(z, i)
            s = np.sum(1.0 / diff) if np.all(diff != 0) else 0.0
            denom = 1.0 - ratio * s
            w = ratio / denom if np.isfinite(ratio) and denom != 0 else 1e-3 * (1 + abs(z[i]))
            z[i] -= w
            pv[i] = np.polyval(coeffs, z[i])
            dpv[i] = np.polyval(dcoeffs, z[i])
            max_step = max(max_step, abs(w) / (1.0 + abs(z[i])))
        res = residuals(z)
        if np.all(res <= tol) and max_step < 1e-12:
            converged = True
            break
        if np.all(res <= 1e-15):
            converged = True
            break
    res = residuals(z)
    if not converged and not np.all(res <= tol):
        raise Diverged(f"Aberth iteration failed after {MAX_ROOT_ITERS} iterations", best=z)
    roots.extend(z.tolist())
    out = _conj_clean(np.array(roots, dtype=complex))
    return RootSet(out, float(np.max(residuals(out[nz:])) if n else 0.0))


def _conj_clean(r: np.ndarray) -> np.ndarray:
    """Enforce exact conjugate symmetry on the roots of a real polynomial.

    Roots are matched to conjugates by an optimal assignment; self-matched
    roots become real and matched pairs are averaged.
    """
    from scipy.optimize import linear_sum_assignment

    r = np.asarray(r, dtype=complex).copy()
    if r.size:
        cost = np.abs(r[:, None] - np.conj(r)[None, :])
        rows, cols = linear_sum_assignment(cost)
        perm = cols[np.argsort(rows)]
        if np.all(perm[perm] == np.arange(r.size)):
            out = r.copy()
            for i, j in enumerate(perm):
                if i == j:
                    out[i] = r[i].real
                elif i < j:
                    m = 0.5 * (r[i] + np.conj(r[j]))
                    out[i], out[j] = m, np.conj(m)
            r = out
    return r[np.lexsort((r.imag, r.real))]


class RationalTF:
    """Ratio of two real polynomials in z; common factors are kept."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1.0):
        num, den = _as_poly(num), _as_poly(den)
        if den.is_zero():
            raise DegenerateLoop("denominator is identically zero")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, key, value):
        raise AttributeError("RationalTF is immutable")

    @classmethod
    def from_zpk(cls, zeros, poles, gain=1.0) -> "RationalTF":
        return cls(Polynomial.from_roots(zeros, gain), Polynomial.from_roots(poles))

    # structural properties
    @property
    def relative_degree(self) -> int:
        if self.num.is_zero():
            return self.den.degree + 1
        return self.den.degree - self.num.degree

    def is_proper(self) -> bool:
        return self.num.is_zero() or self.num.degree <= self.den.degree

    def is_strictly_proper(self) -> bool:
        return self.num.is_zero() or self.num.degree < self.den.degree

    def poles(self, tol=ROOT_TOL) -> np.ndarray:
        if self.den.degree == 0:
            return np.zeros(0, complex)
        return poly_roots(self.den, tol).roots

    def zeros(self, tol=ROOT_TOL) -> np.ndarray:
        if self.num.degree == 0:
            return np.zeros(0, complex)
        return poly_roots(self.num, tol).roots

    # arithmetic, never cancelling
    def __add__(self, other):
        return rational_arith("add", self, other)

    def __radd__(self, other):
        return rational_arith("add", as_tf(other), self)

    def __sub__(self, other):
        return rational_arith("sub", self, other)

    def __rsub__(self, other):
        return rational_arith("sub", as_tf(other), self)

    def __mul__(self, other):
        return rational_arith("mul", self, other)

    def __rmul__(self, other):
        return rational_arith("mul", as_tf(other), self)

    def __truediv__(self, other):
        return rational_arith("div", self, other)

    def __rtruediv__(self, other):
        return rational_arith("div", as_tf(other), self)

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def feedback(self, other) -> "RationalTF":
        return rational_arith("feedback", self, other)

    def __call__(self, z):
        return evaluate(self, z)

    def freqresp(self, z: np.ndarray) -> np.ndarray:
        """Vectorised evaluation without pole checks."""
        z = np.asarray(z, dtype=complex)
        return np.polyval(self.num.coeffs, z) / np.polyval(self.den.coeffs, z)

    def normalized(self) -> "RationalTF":
        """Same function with a monic denominator."""
        d = self.den.lead
        return RationalTF(self.num.coeffs / d, self.den.coeffs / d)

    def __repr__(self):
        return f"RationalTF({self.num.coeffs.tolist()}, {self.den.coeffs.tolist()})"

    def to_text(self) -> str:
        return f"{self.num.to_text()} | {self.den.to_text()}"

    @classmethod
    def from_text(cls, text: str) -> "RationalTF":
        return tf_from_text(text)


def as_tf(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x, 1.0)
    return RationalTF(float(x), 1.0)


def z_tf() -> RationalTF:
    """The shift operator z as a transfer function."""
    return RationalTF([1.0, 0.0], [1.0])


def rational_arith(op: str, f, g) -> RationalTF:
    """Exact coefficient arithmetic on rational functions, no cancellation.

    ``feedback(f, g)`` is ``f / (1 + f g)`` returned as
    ``num_f den_g / (den_f den_g + num_f num_g)``.
    """
    f, g = as_tf(f), as_tf(g)
    nf, df, ng, dg = f.num, f.den, g.num, g.den
    if op == "add":
        num, den = nf * dg + ng * df, df * dg
    elif op == "sub":
        num, den = nf * dg - ng * df, df * dg
    elif op == "mul":
        num, den = nf * ng, df * dg
    elif op == "div":
        num, den = nf * dg, df * ng
    elif op == "feedback":
        num, den = nf * dg, df * dg + nf * ng
    else:
        raise ValueError(f"unknown operation {op!r}")
    if den.is_zero():
        raise DegenerateLoop(f"{op} produced an identically zero denominator")
    return RationalTF(num, den)


def _root_match(a: np.ndarray, b: np.ndarray, tol: float):
    """Greedy one-to-one pairing of roots closer than tol (relative to 1+|z|)."""
    pairs = []
    free_b = list(range(len(b)))
    for i in np.argsort(-np.abs(a)):
        if not free_b:
            break
        d = [abs(a[i] - b[j]) for j in free_b]
        k = int(np.argmin(d))
        if d[k] <= tol * (1.0 + abs(a[i])):
            pairs.append((int(i), free_b.pop(k)))
    return pairs


def cancel_common_roots(f: RationalTF, tol: float = CANCEL_TOL):
    """Remove numerator/denominator root pairs closer than ``tol``.

    Returns the reduced function and the list of cancelled roots.
    """
    f = as_tf(f)
    if f.num.is_zero():
        return RationalTF(0.0, 1.0), []
    zr, pr = f.zeros(), f.poles()
    pairs = _root_match(pr, zr, tol)
    if not pairs:
        return f, []
    kill_p = {i for i, _ in pairs}
    kill_z = {j for _, j in pairs}
    rz = [zr[j] for j in range(len(zr)) if j not in kill_z]
    rp = [pr[i] for i in range(len(pr)) if i not in kill_p]
    g = RationalTF(Polynomial.from_roots(rz, f.num.lead), Polynomial.from_roots(rp, f.den.lead))
    return g, [complex(pr[i]) for i, _ in pairs]


def is_stable(f: RationalTF, policy: str = "as_written", tol: float = CANCEL_TOL,
              margin: float = STABILITY_MARGIN):
    """Pole test against the unit disk.

    Returns ``(stable, offending)`` where offending lists poles with
    ``|z| >= 1 - margin``.  Under ``"after_cancellation"`` root pairs within
    ``tol`` are removed first.
    """
    f = as_tf(f)
    if policy not in ("as_written", "after_cancellation"):
        raise ValueError(f"unknown policy {policy!r}")
    poles = f.poles()
    if policy == "after_cancellation" and not f.num.is_zero() and poles.size:
        pairs = _root_match(poles, f.zeros(), tol)
        keep = sorted(set(range(poles.size)) - {i for i, _ in pairs})
        poles = poles[keep]
    bad = [complex(p) for p in poles if abs(p) >= 1.0 - margin]
    return (not bad) and f.is_proper(), bad


def evaluate(f: RationalTF, z0) -> complex:
    """Value of f at a point; ``z0 = math.inf`` (or None) means z -> infinity."""
    f = as_tf(f)
    if z0 is None or (isinstance(z0, float) and math.isinf(z0)):
        if not f.is_proper():
            raise Improper("cannot evaluate an improper function at infinity")
        if f.relative_degree > 0:
            return 0j
        return complex(f.num.lead / f.den.lead)
    z0 = complex(z0)
    d = f.den(z0)
    if abs(d) <= 1e-12 * f.den.scale(z0):
        raise PoleHit(z0)
    return complex(f.num(z0) / d)


def l2_norm(f: RationalTF, check: bool = True) -> float:
    """l2 norm of the impulse response.

    Computed from the controllability gramian of a canonical realization;
    with ``check`` the truncated impulse response is summed as well and both
    must agree to 1e-8 relative.
    """
    from .statespace import h2_norm_gramian, tf_to_ss

    f = as_tf(f)
    if not f.is_proper():
        raise UnstableNorm("improper transfer function has no finite l2 norm")
    stable, bad = is_stable(f, "as_written")
    if not stable:
        raise UnstableNorm(f"poles on or outside the unit circle: {bad}")
    val = h2_norm_gramian(tf_to_ss(f))
    if check:
        alt = impulse_l2(f)
        if abs(alt - val) > 1e-8 * max(1.0, val):
            raise ArithmeticError(f"gramian norm {val} disagrees with impulse sum {alt}")
    return val


def impulse_response(f: RationalTF, length: int) -> np.ndarray:
    from scipy.signal import lfilter

    f = as_tf(f)
    n = f.den.degree
    num = np.pad(f.num.coeffs, (n - f.num.degree, 0))
    x = np.zeros(length)
    x[0] = 1.0
    return lfilter(num, f.den.coeffs, x)


def impulse_l2(f: RationalTF, tail: float = 1e-10) -> float:
    """Truncated impulse-response norm with a geometric tail bound below ``tail``."""
    f = as_tf(f)
    poles = f.poles()
    rho = float(np.max(np.abs(poles))) if poles.size else 0.0
    if rho >= 1.0:
        raise UnstableNorm("impulse sum diverges")
    mult = max(1, f.den.degree)
    length = 64
    if rho > 0:
        # rho^k k^(mult-1) < tail * (1 - rho)
        k = math.log(tail * (1 - rho) ** (mult + 1) / 10.0) / math.log(rho)
        length = int(min(max(k * (1 + 0.2 * mult), 64), 5_000_000))
    h = impulse_response(f, length)
    return float(np.sqrt(np.sum(h * h)))


def is_inner(f: RationalTF, tol: float = 1e-9, samples: int = 1024) -> bool:
    """Unit modulus on the unit circle, checked on an even frequency grid."""
    f = as_tf(f)
    w = np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)
    return bool(np.all(np.abs(np.abs(f.freqresp(w)) - 1.0) <= tol))


def tf_from_text(text: str) -> RationalTF:
    """Parse ``"num coeffs | den coeffs"`` (descending powers)."""
    parts = text.split("|")
    if len(parts) == 1:
        return RationalTF([float(t) for t in parts[0].split()], 1.0)
    if len(parts) != 2:
        raise ValueError(f"expected 'num | den', got {text!r}")
    num = [float(t) for t in parts[0].replace(",", " ").split()]
    den = [float(t) for t in parts[1].replace(",", " ").split()]
    if not num or not den:
        raise ValueError(f"empty coefficient list in {text!r}")
    return RationalTF(num, den)


def tf_to_text(f: RationalTF) -> str:
    return as_tf(f).to_text()
