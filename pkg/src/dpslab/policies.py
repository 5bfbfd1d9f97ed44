"""Controller parameterizations: rational pole/zero, ReLU networks, static gains."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .simulate import LTIStepper
from .tf import Polynomial, RationalTF

# Weights printed for the trained networks; the prestabilizer output row is
# printed as "0.1.2235, ..." and is read as 1.2235.
PUBLISHED_NEURAL = {
    "W1": [[-0.6460, 0.7106, -0.6460], [0.4119, -0.4335, 3.1555]],
    "W2": [[-1.5480, 0.3169]],
}
PUBLISHED_PRESTABILIZER = {
    "W1": [[0.4561], [1.5840], [-0.7662]],
    "W2": [[1.2235, 0.3421, -1.4357]],
    "reconstructed": True,
}
PUBLISHED_AUGMENTATION = {
    "W1": [[0.5138, 0.3661, -0.6312], [2.3475, 0.5361, -0.8748]],
    "W2": [[-0.7884, 0.5315]],
}


def _relu(x):
    return x if x > 0.0 else 0.0


class Policy:
    """Common interface: ``stepper()`` gives a fresh zero-state e -> u map."""

    kind = "Policy"

    def stepper(self):
        raise NotImplementedError

    def transfer_function(self) -> Optional[RationalTF]:
        return None

    @property
    def is_lti(self) -> bool:
        return self.transfer_function() is not None

    def to_vector(self) -> np.ndarray:
        raise NotImplementedError

    def from_vector(self, x) -> "Policy":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class PoleZero(Policy):
    """C(z) = K prod(z - z_i) / prod(z - p_i)."""

    K: float
    zeros: Tuple[float, ...] = ()
    poles: Tuple[float, ...] = ()
    kind = "PoleZero"

    def __post_init__(self):
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "zeros", tuple(float(v) for v in self.zeros))
        object.__setattr__(self, "poles", tuple(float(v) for v in self.poles))
        if len(self.zeros) > len(self.poles):
            raise ValueError("PoleZero needs at least as many poles as zeros")

    def transfer_function(self) -> RationalTF:
        return RationalTF(Polynomial.from_roots(self.zeros, self.K), Polynomial.from_roots(self.poles))

    def stepper(self):
        return LTIStepper(self.transfer_function())

    def batch_stepper(self, rows: int):
        return LTIStepper(self.transfer_function())

    def to_vector(self):
        return np.array([self.K, *self.zeros, *self.poles])

    def from_vector(self, x):
        nz = len(self.zeros)
        return PoleZero(x[0], tuple(x[1:1 + nz]), tuple(x[1 + nz:]))

    def to_dict(self):
        return {"type": self.kind, "K": self.K, "zeros": list(self.zeros), "poles": list(self.poles)}


@dataclass(frozen=True)
class StaticGain(Policy):
    K: float
    kind = "StaticGain"

    def transfer_function(self) -> RationalTF:
        return RationalTF(self.K)

    def stepper(self):
        K = float(self.K)
        return lambda e: K * e

    def batch_stepper(self, rows: int):
        return self.stepper()

    def to_vector(self):
        return np.array([self.K])

    def from_vector(self, x):
        return StaticGain(float(x[0]))

    def to_dict(self):
        return {"type": self.kind, "K": self.K}


def _as_matrix(W, rows=None, cols=None) -> np.ndarray:
    a = np.array(W, dtype=float)
    if a.ndim == 1:
        a = a.reshape(rows if rows is not None else 1, -1) if cols is None else a.reshape(-1, cols)
    return a


class _NeuralStepper:
    """u_k = W2 relu(W1 [u_(k-m) .. u_(k-1), e_(k-m) .. e_k])."""

    __slots__ = ("W1", "W2", "m", "us", "es")

    def __init__(self, W1, W2, m):
        self.W1 = [list(map(float, row)) for row in W1]
        self.W2 = [float(v) for v in np.ravel(W2)]
        self.m = m
        self.us = deque([0.0] * m, maxlen=m)
        self.es = deque([0.0] * m, maxlen=m)

    def __call__(self, e):
        x = list(self.us) + list(self.es) + [e]
        u = 0.0
        for row, w2 in zip(self.W1, self.W2):
            s = 0.0
            for wij, xj in zip(row, x):
                s += wij * xj
            if s > 0.0:
                u += w2 * s
        if self.m:
            self.us.append(u)
            self.es.append(e)
        return u


@dataclass(frozen=True, eq=False)
class Neural(Policy):
    """One-hidden-layer ReLU network with zero biases and memory m."""

    W1: np.ndarray
    W2: np.ndarray
    m: int = 1
    kind = "Neural"

    def __post_init__(self):
        W1 = _as_matrix(self.W1, cols=2 * self.m + 1)
        W2 = _as_matrix(self.W2).reshape(1, -1)
        if W1.shape[1] != 2 * self.m + 1 or W2.shape[1] != W1.shape[0]:
            raise ValueError(f"weight shapes {W1.shape}, {W2.shape} inconsistent with memory {self.m}")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def forward(self, x) -> float:
        h = np.maximum(self.W1 @ np.asarray(x, dtype=float), 0.0)
        return float((self.W2 @ h)[0])

    def stepper(self):
        return _NeuralStepper(self.W1, self.W2, self.m)

    def batch_stepper(self, rows: int):
        m, W1, w2 = self.m, self.W1, self.W2.ravel()
        Wu, We = W1[:, :m], W1[:, m:]
        us = np.zeros((m, rows))
        es = np.zeros((m + 1, rows))

        def step(e):
            es[:-1] = es[1:]
            es[-1] = e
            h = Wu @ us + We @ es
            u = w2 @ np.maximum(h, 0.0)
            if m:
                us[:-1] = us[1:]
                us[-1] = u
            return u
        return step

    def to_vector(self):
        return np.concatenate([self.W1.ravel(), self.W2.ravel()])

    def from_vector(self, x):
        k = self.W1.size
        x = np.asarray(x, dtype=float)
        return Neural(x[:k].reshape(self.W1.shape), x[k:].reshape(self.W2.shape), self.m)

    def to_dict(self):
        return {"type": self.kind, "W1": self.W1.tolist(), "W2": self.W2.tolist(), "m": self.m}


@dataclass(frozen=True, eq=False)
class NeuralStaticGain(Policy):
    """u = W2 relu(W1 e): piecewise-linear static map of the error."""

    W1: np.ndarray
    W2: np.ndarray
    kind = "NeuralStaticGain"

    def __post_init__(self):
        W1 = np.array(self.W1, dtype=float).reshape(-1, 1)
        W2 = np.array(self.W2, dtype=float).reshape(1, -1)
        if W2.shape[1] != W1.shape[0]:
            raise ValueError("W1 (h x 1) and W2 (1 x h) disagree on h")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)

    def slopes(self) -> Tuple[float, float]:
        """Gains for e > 0 and e < 0."""
        w1, w2 = self.W1.ravel(), self.W2.ravel()
        pos = float(np.sum(w2 * np.where(w1 > 0, w1, 0.0)))
        neg = float(np.sum(w2 * np.where(w1 < 0, w1, 0.0)))
        return pos, neg

    def transfer_function(self) -> Optional[RationalTF]:
        pos, neg = self.slopes()
        if abs(pos - neg) <= 1e-12 * max(1.0, abs(pos)):
            return RationalTF(pos)
        return None

    def stepper(self):
        pos, neg = self.slopes()
        return lambda e: pos * e if e > 0.0 else neg * e

    def batch_stepper(self, rows: int):
        pos, neg = self.slopes()
        return lambda e: np.where(e > 0.0, pos, neg) * e

    def to_vector(self):
        return np.concatenate([self.W1.ravel(), self.W2.ravel()])

    def from_vector(self, x):
        h = self.W1.shape[0]
        return NeuralStaticGain(np.asarray(x[:h]), np.asarray(x[h:]))

    def to_dict(self):
        return {"type": self.kind, "W1": self.W1.tolist(), "W2": self.W2.tolist()}


@dataclass(frozen=True, eq=False)
class Composite(Policy):
    """Prestabilizer and augmentation read the same error; outputs add."""

    prestabilizer: Policy
    augmentation: Policy
    kind = "Composite"

    def transfer_function(self) -> Optional[RationalTF]:
        a, b = self.prestabilizer.transfer_function(), self.augmentation.transfer_function()
        if a is None or b is None:
            return None
        return a + b

    def stepper(self):
        s1, s2 = self.prestabilizer.stepper(), self.augmentation.stepper()
        return lambda e: s1(e) + s2(e)

    def batch_stepper(self, rows: int):
        s1, s2 = self.prestabilizer.batch_stepper(rows), self.augmentation.batch_stepper(rows)
        return lambda e: s1(e) + s2(e)

    def to_vector(self):
        return self.augmentation.to_vector()

    def from_vector(self, x):
        return Composite(self.prestabilizer, self.augmentation.from_vector(x))

    def to_dict(self):
        return {"type": self.kind, "prestabilizer": self.prestabilizer.to_dict(),
                "augmentation": self.augmentation.to_dict()}


def policy_from_dict(d: dict) -> Policy:
    t = d.get("type")
    if t == "PoleZero":
        return PoleZero(d["K"], tuple(d.get("zeros", ())), tuple(d.get("poles", ())))
    if t == "StaticGain":
        return StaticGain(float(d["K"]))
    if t == "Neural":
        return Neural(d["W1"], d["W2"], int(d.get("m", 1)))
    if t == "NeuralStaticGain":
        return NeuralStaticGain(d["W1"], d["W2"])
    if t == "Composite":
        return Composite(policy_from_dict(d["prestabilizer"]), policy_from_dict(d["augmentation"]))
    raise ValueError(f"unknown policy type {t!r}")


def policy_from_json(text: str) -> Policy:
    return policy_from_dict(json.loads(text))


def policy_eval(policy: Policy, u_prev: float, e_prev: float, e_now: float) -> float:
    """Single control update from the previous control and two error samples.

    Exact for the memory-one architectures (Neural with m = 1, static maps and
    PoleZero controllers with at most one pole).
    """
    if isinstance(policy, Neural):
        if policy.m != 1:
            raise ValueError("policy_eval takes memory-one networks only")
        return policy.forward([u_prev, e_prev, e_now])
    if isinstance(policy, (StaticGain, NeuralStaticGain)):
        return policy.stepper()(e_now)
    if isinstance(policy, PoleZero):
        if len(policy.poles) > 1:
            raise ValueError("policy_eval covers PoleZero controllers of degree <= 1")
        if not policy.poles:
            return policy.K * e_now
        u = policy.poles[0] * u_prev
        if policy.zeros:
            return u + policy.K * (e_now - policy.zeros[0] * e_prev)
        return u + policy.K * e_prev
    raise ValueError(f"policy_eval does not cover {policy.kind}; use stepper()")


def published_neural() -> Neural:
    return Neural(PUBLISHED_NEURAL["W1"], PUBLISHED_NEURAL["W2"])


def published_prestabilizer() -> NeuralStaticGain:
    return NeuralStaticGain(PUBLISHED_PRESTABILIZER["W1"], PUBLISHED_PRESTABILIZER["W2"])


def published_composite() -> Composite:
    return Composite(published_prestabilizer(),
                     Neural(PUBLISHED_AUGMENTATION["W1"], PUBLISHED_AUGMENTATION["W2"]))
