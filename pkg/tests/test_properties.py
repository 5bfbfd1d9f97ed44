"""Randomized invariants checked with hypothesis."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dpslab.audit import cancellation_detector, four_maps, internal_stability
from dpslab.optim import NelderMeadConfig, nelder_mead
from dpslab.policies import Neural, policy_eval
from dpslab.properties import random_pair
from dpslab.simulate import NoiseSpec, filter_signal, l2_truncated, noise_sequence
from dpslab.statespace import h2_norm_gramian, tf_to_ss
from dpslab.tf import Polynomial, RationalTF, evaluate, is_stable, l2_norm
from dpslab.youla import FirstOrderProblem, first_order_factors, fir_cost, model_match_fir, youla_controller

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
stable_root = st.floats(-0.9, 0.9)
coef = st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 1e-3)


def _tf(zeros, poles, k):
    return RationalTF(Polynomial.from_roots(zeros, k), Polynomial.from_roots(poles))


@SETTINGS
@given(st.lists(stable_root, max_size=2), st.lists(stable_root, min_size=1, max_size=3), coef, coef,
       st.integers(0, 2 ** 31))
def test_filter_is_linear(zeros, poles, alpha, beta, seed):
    f = _tf(zeros[: len(poles)], poles, 1.0)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=40), rng.normal(size=40)
    lhs = filter_signal(f, alpha * u + beta * v).samples
    rhs = alpha * filter_signal(f, u).samples + beta * filter_signal(f, v).samples
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.max(np.abs(rhs))))


@SETTINGS
@given(st.lists(stable_root, max_size=2), st.lists(st.floats(-0.8, 0.8), min_size=1, max_size=3), coef)
def test_parseval_and_gramian_agree(zeros, poles, k):
    f = _tf(zeros[: len(poles)], poles, k)
    ref = l2_norm(f)
    imp = np.zeros(400)
    imp[0] = 1.0
    assert abs(l2_truncated(filter_signal(f, imp)) - ref) <= 1e-8 * max(1.0, ref)
    assert abs(h2_norm_gramian(tf_to_ss(f)) - ref) <= 1e-8 * max(1.0, ref)


@SETTINGS
@given(st.floats(1.01, 3.0), st.lists(stable_root, max_size=2), st.lists(coef, min_size=1, max_size=3))
def test_youla_parameterization_stabilizes(a, qpoles, qnum):
    cf = first_order_factors(a)
    Q = RationalTF(qnum[: len(qpoles) + 1], Polynomial.from_roots(qpoles))
    G = RationalTF([1.0], [1.0, -a])
    C = youla_controller(cf, Q)
    assert internal_stability(G, C).internally_stable
    z = 0.3 + 1.9j  # off the real axis, so never a plant or parameter pole
    S = cf.M * (cf.Y + cf.N * Q)
    assert abs(evaluate(S, z) - 1 / (1 + evaluate(G, z) * evaluate(C, z))) < 1e-8


@SETTINGS
@given(st.integers(0, 2 ** 32 - 1))
def test_verdict_matches_map_definition(seed):
    G, C = random_pair(np.random.default_rng(seed))
    try:
        maps = four_maps(G, C)
    except Exception:
        return
    v = internal_stability(G, C)
    by_maps = all(is_stable(T, "after_cancellation")[0] for _, T in maps.items())
    no_unstable_pair = not any(c.unstable for c in cancellation_detector(G, C))
    assert v.internally_stable == (by_maps and no_unstable_pair)


@SETTINGS
@given(st.floats(1.01, 3.0), st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 0.05), st.integers(1, 12),
       st.integers(1, 4))
def test_fir_cost_bounded_below_by_optimum(a, r0, n, m):
    p = FirstOrderProblem(a, r0, n)
    _, cost = model_match_fir(p, m)
    assert abs(cost - p.optimal_cost) <= 1e-6 * p.optimal_cost
    rng = np.random.default_rng(n * 7 + m)
    q = rng.normal(size=m)
    q[-1] = -a - q[:-1].sum()
    worst = max(fir_cost(q, p, w) for w in range(1, m + 2))
    assert worst >= p.optimal_cost * (1 - 1e-9)


@SETTINGS
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_neural_zero_input_and_json(w1, w2):
    nn = Neural(np.reshape(w1, (2, 3)), np.reshape(w2, (1, 2)))
    assert policy_eval(nn, 0.0, 0.0, 0.0) == 0.0
    from dpslab.policies import policy_from_json
    assert policy_from_json(nn.to_json()).to_dict() == nn.to_dict()


@SETTINGS
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=3))
def test_nelder_mead_never_worse_than_start(x0):
    def f(x):
        return float(np.sum(np.cos(3 * x) + 0.1 * x * x))
    res = nelder_mead(f, x0, NelderMeadConfig(max_iters=200, restarts=0))
    assert res.f <= f(np.asarray(x0, dtype=float))


@SETTINGS
@given(st.integers(0, 2 ** 63 - 1), st.sampled_from(["gaussian", "binary"]))
def test_noise_streams_are_bit_identical(seed, kind):
    a = noise_sequence(NoiseSpec(kind, 0.3, seed), 64)
    b = noise_sequence(NoiseSpec(kind, 0.3, seed), 64)
    assert a.tobytes() == b.tobytes() and np.all(np.isfinite(a))
    assert math.isclose(float(np.max(np.abs(a))), 0.3) if kind == "binary" else True
