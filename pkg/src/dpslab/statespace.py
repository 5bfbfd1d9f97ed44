"""State-space realizations, coprime factors and Youla generators (SISO)."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .errors import (BadGains, BadPartition, IllPosedLFT, Improper,
                     PlacementFailed, UnstableNorm)
from .tf import Polynomial, RationalTF, as_tf


@dataclass(frozen=True)
class StateSpace:
    """Discrete realization x+ = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        n = A.shape[0]
        D = np.atleast_2d(np.array(self.D, dtype=float))
        p, m = D.shape
        B = np.array(self.B, dtype=float).reshape(n, m)
        C = np.array(self.C, dtype=float).reshape(p, n)
        if A.shape != (n, n):
            raise BadPartition(f"A must be square, got {A.shape}")
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def spectral_radius(self) -> float:
        return spectral_radius(self.A)

    def freqresp(self, z: complex) -> np.ndarray:
        """Transfer matrix C (zI - A)^-1 B + D at a single point."""
        if self.n == 0:
            return self.D.astype(complex)
        return self.C @ np.linalg.solve(z * np.eye(self.n) - self.A, self.B) + self.D

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k).tolist() for k in "ABCD"})

    @classmethod
    def from_json(cls, text: str) -> "StateSpace":
        d = json.loads(text)
        n = len(d["A"])
        A = np.array(d["A"], dtype=float).reshape(n, n)
        return cls(A, d["B"], d["C"], d["D"])


def spectral_radius(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def tf_to_ss(f: RationalTF) -> StateSpace:
    """Controllable canonical realization of a proper SISO transfer function."""
    f = as_tf(f)
    if not f.is_proper():
        raise Improper("improper transfer function has no state-space realization")
    den = f.den.coeffs / f.den.lead
    num = f.num.coeffs / f.den.lead
    n = den.size - 1
    num = np.pad(num, (n + 1 - num.size, 0))
    d0 = num[0]
    rem = num[1:] - d0 * den[1:]
    A = np.zeros((n, n))
    if n:
        A[0, :] = -den[1:]
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    if n:
        B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return StateSpace(A, B, C, [[d0]])


def charpoly(A: np.ndarray) -> Polynomial:
    """det(zI - A) by the Faddeev-LeVerrier recursion."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = [1.0]
    Mk = np.zeros_like(A)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c[-1] * I
        c.append(-np.trace(A @ Mk) / k)
    return Polynomial(c)


def ss_to_tf(ss: StateSpace, out: int = 0, inp: int = 0) -> RationalTF:
    """Entry (out, inp) of the transfer matrix, denominator det(zI - A).

    The numerator is det(zI - A) times the Markov series d + sum_k c A^(k-1) b z^-k,
    truncated at degree n. Nothing is cancelled, so the denominator always has
    degree n, and no difference of large characteristic polynomials is formed.
    """
    b = ss.B[:, [inp]]
    c = ss.C[[out], :]
    d = float(ss.D[out, inp])
    pa = charpoly(ss.A)
    n = ss.n
    h = np.empty(n + 1)
    h[0] = d
    v = b
    for k in range(1, n + 1):
        h[k] = float((c @ v)[0, 0])
        v = ss.A @ v
    num = np.convolve(pa.coeffs, h)[: n + 1]
    return RationalTF(Polynomial(num), pa)


def h2_norm_gramian(ss: StateSpace) -> float:
    """sqrt(trace(C P C^T + D D^T)) with P the controllability gramian, P = A P A^T + B B^T."""
    if ss.n and spectral_radius(ss.A) >= 1.0:
        raise UnstableNorm("system matrix is not Schur stable")
    direct = float(np.trace(ss.D @ ss.D.T))
    if ss.n == 0:
        return float(np.sqrt(direct))
    # the bilinear solver is far more accurate than the default Kronecker one on companion forms
    P = solve_discrete_lyapunov(ss.A, ss.B @ ss.B.T, method="bilinear")
    return float(np.sqrt(max(float(np.trace(ss.C @ P @ ss.C.T)), 0.0) + direct))


@dataclass(frozen=True)
class GainPair:
    """State feedback row F and observer column L."""

    F: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", np.atleast_2d(np.array(self.F, dtype=float)).reshape(1, -1))
        object.__setattr__(self, "L", np.array(self.L, dtype=float).reshape(-1, 1))

    def check(self, ss: StateSpace) -> None:
        if self.F.shape[1] != ss.n or self.L.shape[0] != ss.n:
            raise BadGains("gain dimensions do not match the realization")
        rf = spectral_radius(ss.A + ss.B @ self.F)
        rl = spectral_radius(ss.A + self.L @ ss.C)
        if rf >= 1.0 or rl >= 1.0:
            raise BadGains(f"gains not stabilizing: rho(A+BF)={rf:.6g}, rho(A+LC)={rl:.6g}")


@dataclass(frozen=True)
class CoprimeFactors:
    """G = N / M with N X + M Y = 1; all four factors stable."""

    N: RationalTF
    M: RationalTF
    X: RationalTF
    Y: RationalTF

    def bezout_residual(self, samples: int = 512) -> float:
        z = np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)
        r = (self.N.freqresp(z) * self.X.freqresp(z)
             + self.M.freqresp(z) * self.Y.freqresp(z) - 1.0)
        return float(np.max(np.abs(r)))

    def plant(self) -> RationalTF:
        return self.N / self.M


def _siso_tf(A, B, C, D) -> RationalTF:
    return ss_to_tf(StateSpace(A, B, C, D))


def coprime_from_ss(ss: StateSpace, gains: GainPair) -> CoprimeFactors:
    """Right coprime factors and Bezout partners from a stabilizing gain pair.

    With A_F = A + B F and A_L = A + L C:

        M = F (zI - A_F)^-1 B + 1          N = (C + D F)(zI - A_F)^-1 B + D
        Y = F (zI - A_L)^-1 (-(B + L D)) + 1
        X = F (zI - A_L)^-1 L

    This pairing satisfies N X + M Y = 1 identically.
    """
    if ss.n_inputs != 1 or ss.n_outputs != 1:
        raise BadPartition("coprime_from_ss handles SISO realizations only")
    gains.check(ss)
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    F, L = gains.F, gains.L
    AF = A + B @ F
    AL = A + L @ C
    M = _siso_tf(AF, B, F, [[1.0]])
    N = _siso_tf(AF, B, C + D @ F, D)
    Y = _siso_tf(AL, -(B + L @ D), F, [[1.0]])
    X = _siso_tf(AL, L, F, [[0.0]])
    return CoprimeFactors(N, M, X, Y)


def _ackermann(A: np.ndarray, B: np.ndarray, poles) -> np.ndarray:
    """Row K with eig(A - B K) = poles (single input)."""
    n = A.shape[0]
    if n > 4:
        raise PlacementFailed("pole placement is limited to n <= 4")
    poles = np.asarray(list(poles), dtype=complex)
    if poles.size != n:
        raise PlacementFailed(f"need {n} desired poles, got {poles.size}")
    if np.any(np.abs(poles) >= 1.0):
        raise PlacementFailed("desired poles must lie inside the unit disk")
    phi = np.poly(poles)
    if np.max(np.abs(phi.imag)) > 1e-9:
        raise PlacementFailed("desired poles are not closed under conjugation")
    phi = phi.real
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
    if np.linalg.cond(ctrb) > 1e12:
        raise PlacementFailed("realization is not controllable (observable)")
    phiA = sum(c * np.linalg.matrix_power(A, n - k) for k, c in enumerate(phi))
    en = np.zeros((1, n))
    en[0, -1] = 1.0
    return en @ np.linalg.solve(ctrb, phiA)


def stabilizing_gains(ss: StateSpace, poles_F, poles_L=None) -> GainPair:
    """Place eig(A+BF) at ``poles_F`` and eig(A+LC) at ``poles_L`` (default the same)."""
    if poles_L is None:
        poles_L = poles_F
    F = -_ackermann(ss.A, ss.B, poles_F)
    L = -_ackermann(ss.A.T, ss.C.T, poles_L).T
    return GainPair(F, L)


@dataclass(frozen=True)
class Partitioned:
    """Generalized plant with inputs [w; u] and outputs [z; y].

    ``nw`` exogenous inputs and ``nz`` regulated outputs come first.
    """

    ss: StateSpace
    nw: int = 1
    nz: int = 1

    def blocks(self):
        s, nw, nz = self.ss, self.nw, self.nz
        return (s.A, s.B[:, :nw], s.B[:, nw:], s.C[:nz], s.C[nz:],
                s.D[:nz, :nw], s.D[:nz, nw:], s.D[nz:, :nw], s.D[nz:, nw:])

    def entry(self, i: int, j: int) -> RationalTF:
        """Transfer function of block (i, j), i, j in {1, 2}, for SISO blocks."""
        out = 0 if i == 1 else self.nz
        inp = 0 if j == 1 else self.nw
        return ss_to_tf(self.ss, out, inp)


def tracking_generalized_plant(ss: StateSpace) -> Partitioned:
    """SISO tracking loop: inputs [r, u], outputs [e, e] with e = r - y.

    The controller closes u = K e (the loop convention used everywhere else).
    """
    if ss.n_inputs != 1 or ss.n_outputs != 1:
        raise BadPartition("tracking partition needs a SISO plant")
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    n = ss.n
    Bg = np.hstack([np.zeros((n, 1)), B])
    Cg = np.vstack([-C, -C])
    Dg = np.array([[1.0, -D[0, 0]], [1.0, -D[0, 0]]])
    return Partitioned(StateSpace(A, Bg, Cg, Dg), 1, 1)


def _gen_gains(gen: Partitioned, gains: GainPair):
    A, B1, B2, C1, C2, D11, D12, D21, D22 = gen.blocks()
    n = A.shape[0]
    if B2.shape[1] != 1 or C2.shape[0] != 1 or gains.F.shape[1] != n or gains.L.shape[0] != n:
        raise BadPartition("generator needs a SISO control channel matching the gains")
    # plant gains are stated for y = C x, the measured channel is -y
    Lg = -gains.L
    return A, B1, B2, C1, C2, D11, D12, D21, D22, gains.F, Lg


def controller_generator(ss: StateSpace, gains: GainPair) -> Partitioned:
    """Controller generator J: every stabilizing controller is F_l(J, Q), Q stable."""
    gains.check(ss)
    gen = tracking_generalized_plant(ss)
    A, B1, B2, C1, C2, D11, D12, D21, D22, F, Lg = _gen_gains(gen, gains)
    AJ = A + B2 @ F + Lg @ C2 + Lg @ D22 @ F
    BJ = np.hstack([-Lg, B2 + Lg @ D22])
    CJ = np.vstack([F, -(C2 + D22 @ F)])
    DJ = np.array([[0.0, 1.0], [1.0, -D22[0, 0]]])
    return Partitioned(StateSpace(AJ, BJ, CJ, DJ), 1, 1)


def closed_loop_generator(ss: StateSpace, gains: GainPair) -> Partitioned:
    """Closed-loop generator T with T22 = 0, so F_l(T, Q) = T11 + T12 Q T21."""
    gains.check(ss)
    gen = tracking_generalized_plant(ss)
    A, B1, B2, C1, C2, D11, D12, D21, D22, F, Lg = _gen_gains(gen, gains)
    n = A.shape[0]
    Z = np.zeros((n, n))
    AT = np.block([[A + B2 @ F, -B2 @ F], [Z, A + Lg @ C2]])
    BT = np.block([[B1, B2], [B1 + Lg @ D21, np.zeros_like(B2)]])
    CT = np.block([[C1 + D12 @ F, -D12 @ F], [np.zeros_like(C2), C2]])
    DT = np.block([[D11, D12], [D21, np.zeros_like(D22)]])
    return Partitioned(StateSpace(AT, BT, CT, DT), 1, 1)


def lft_lower(gen: Partitioned, Q) -> RationalTF:
    """Lower LFT with u = Q y closed around the second channel, in state space.

    Well-posed when 1 - D22 Q(inf) is nonzero.
    """
    Q = as_tf(Q)
    A, B1, B2, C1, C2, D11, D12, D21, D22 = gen.blocks()
    if B1.shape[1] != 1 or B2.shape[1] != 1 or C1.shape[0] != 1 or C2.shape[0] != 1:
        raise BadPartition("lft_lower handles 2x2 SISO partitions")
    q = tf_to_ss(Q)
    Aq, Bq, Cq, Dq = q.A, q.B, q.C, q.D
    w = 1.0 - float(D22[0, 0] * Dq[0, 0])
    if abs(w) < 1e-12:
        raise IllPosedLFT("1 - D22 Q(inf) vanishes")
    # u = (Cq xq + Dq C2 x + Dq D21 w) / w
    n, nq = A.shape[0], Aq.shape[0]
    Ux = Dq @ C2 / w
    Uq = Cq / w
    Uw = Dq @ D21 / w
    # y = C2 x + D21 w + D22 u
    Yx = C2 + D22 @ Ux
    Yq = D22 @ Uq
    Yw = D21 + D22 @ Uw
    Acl = np.block([[A + B2 @ Ux, B2 @ Uq], [Bq @ Yx, Aq + Bq @ Yq]])
    Bcl = np.vstack([B1 + B2 @ Uw, Bq @ Yw])
    Ccl = np.hstack([C1 + D12 @ Ux, D12 @ Uq])
    Dcl = D11 + D12 @ Uw
    return ss_to_tf(StateSpace(Acl.reshape(n + nq, n + nq), Bcl, Ccl, Dcl))


def _over_common_den(f: RationalTF, g: RationalTF):
    if f.den.allclose(g.den, rtol=0, atol=0):
        return f.num, g.num, f.den
    return f.num * g.den, g.num * f.den, f.den * g.den


def youla_q_for_controller(cf: CoprimeFactors, C) -> RationalTF:
    """Parameter Q with C = (X - M Q)/(Y + N Q); common roots are not removed.

    Shared denominators of (X, Y) and of (M, N) are used once, so the result
    has no repeated spurious factors.  The generator of
    :func:`controller_generator` builds its central factors on A + BF while
    X, Y here use A + LC, so the two parameters differ by the stable unit
    det(zI - A_F)/det(zI - A_L) and a sign.  With equal F and L poles
    ``lft_lower(J, -Q)`` returns C exactly.
    """
    C = as_tf(C)
    nx, ny, dxy = _over_common_den(cf.X, cf.Y)
    nm, nn, dmn = _over_common_den(cf.M, cf.N)
    num = (nx * C.den - ny * C.num) * dmn
    den = dxy * (nm * C.den + nn * C.num)
    return RationalTF(num, den)
