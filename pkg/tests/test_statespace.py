import math

import numpy as np
import pytest

from dpslab.errors import BadGains, BadPartition, IllPosedLFT, Improper, PlacementFailed, UnstableNorm
from dpslab.statespace import (GainPair, Partitioned, StateSpace, closed_loop_generator, coprime_from_ss,
                               controller_generator, h2_norm_gramian, lft_lower, ss_to_tf, stabilizing_gains,
                               tf_to_ss)
from dpslab.tf import Polynomial, RationalTF, evaluate, l2_norm
from dpslab.youla import pulse_tf

A = 1.1


def _close(f, g, z=(2.0, 0.3 + 1.7j, -1.5, 3j)):
    return all(abs(evaluate(f, zz) - evaluate(g, zz)) < 1e-10 * (1 + abs(evaluate(g, zz))) for zz in z)


def test_first_order_realization():
    ss = tf_to_ss(RationalTF([1.0], [1.0, -A]))
    assert np.allclose(ss.A, [[A]]) and np.allclose(ss.B, [[1]]) and np.allclose(ss.C, [[1]])
    assert np.allclose(ss.D, [[0]])


def test_delay_realization():
    ss = tf_to_ss(RationalTF([1.0], [1.0, 0.0]))
    assert np.allclose(ss.A, [[0]]) and np.allclose(ss.D, [[0]])


def test_allpass_realization_matches_samples():
    M = RationalTF([1.0, -A], [A, -1.0])
    ss = tf_to_ss(M)
    assert ss.n == 1
    assert abs(ss.freqresp(2.0)[0, 0] - evaluate(M, 2.0)) < 1e-12
    assert _close(ss_to_tf(ss), M)


def test_improper_rejected():
    with pytest.raises(Improper):
        tf_to_ss(RationalTF([1.0, 0.0, 0.0], [1.0, 0.0]))


def test_gramian_norms():
    assert abs(h2_norm_gramian(tf_to_ss(RationalTF([1.0], [1.0, 0.0]))) - 1.0) < 1e-14
    assert abs(h2_norm_gramian(tf_to_ss(RationalTF([1.0], [1.0, -0.5]))) - math.sqrt(4 / 3)) < 1e-12
    S = RationalTF(A * (Polynomial([1.0, -A]) * Polynomial([1.0, -1.0])), Polynomial([A, -1.0]) * Polynomial([1.0, 0.0]))
    assert abs(h2_norm_gramian(tf_to_ss(S * pulse_tf(1.0, 10))) - A * math.sqrt(2)) < 1e-9


def test_gramian_rejects_unstable():
    with pytest.raises(UnstableNorm):
        h2_norm_gramian(tf_to_ss(RationalTF([1.0], [1.0, -A])))


def test_stable_plant_with_zero_gains():
    G = RationalTF([1.0], [1.0, -0.5])
    ss = tf_to_ss(G)
    cf = coprime_from_ss(ss, GainPair(np.zeros((1, 1)), np.zeros((1, 1))))
    assert _close(cf.M, RationalTF(1.0)) and _close(cf.N, G)
    assert _close(cf.X, RationalTF(0.0)) and _close(cf.Y, RationalTF(1.0))
    assert cf.bezout_residual() < 1e-12


def test_scalar_placement():
    ss = tf_to_ss(RationalTF([1.0], [1.0, -A]))
    g = stabilizing_gains(ss, [0.0], [0.5])
    assert np.allclose(g.F, [[-A]])
    assert np.allclose(g.L, [[-0.6]])


def test_placement_needs_controllability():
    ss = StateSpace(np.diag([1.1, 0.5]), [[1.0], [0.0]], [[1.0, 1.0]], [[0.0]])
    with pytest.raises(PlacementFailed):
        stabilizing_gains(ss, [0.1, 0.2])


def test_bad_gains_rejected():
    ss = tf_to_ss(RationalTF([1.0], [1.0, -A]))
    with pytest.raises(BadGains):
        coprime_from_ss(ss, GainPair(np.zeros((1, 1)), np.zeros((1, 1))))


def test_unstable_second_order_factors():
    G = RationalTF([1.0, 0.4], Polynomial.from_roots([1.3, -0.6]))
    ss = tf_to_ss(G)
    cf = coprime_from_ss(ss, stabilizing_gains(ss, [0.2, -0.1], [0.3, 0.0]))
    assert cf.bezout_residual() < 1e-10
    assert _close(cf.plant(), G)


def test_q_zero_gives_observer_controller():
    G = RationalTF([1.0], [1.0, -A])
    ss = tf_to_ss(G)
    gains = stabilizing_gains(ss, [0.0], [0.5])
    cf = coprime_from_ss(ss, gains)
    T = closed_loop_generator(ss, gains)
    J = controller_generator(ss, gains)
    assert _close(lft_lower(T, 0.0), T.entry(1, 1))
    assert _close(lft_lower(J, 0.0), cf.X / cf.Y)
    # closing the central controller gives T11 as the sensitivity
    assert _close(T.entry(1, 1), RationalTF(1.0).feedback(G * (cf.X / cf.Y)))


def test_controller_generator_matches_youla_family_with_equal_poles():
    from dpslab.youla import youla_controller
    G = RationalTF([1.0], [1.0, -A])
    ss = tf_to_ss(G)
    gains = stabilizing_gains(ss, [0.3], [0.3])
    cf = coprime_from_ss(ss, gains)
    J = controller_generator(ss, gains)
    Q = RationalTF([0.3, 0.1], [1.0, -0.4])
    # the generator's parameter enters with the opposite sign
    assert _close(lft_lower(J, -Q), youla_controller(cf, Q))


def test_controller_generator_stabilizes_for_stable_parameters():
    from dpslab.audit import internal_stability
    G = RationalTF([1.0, 0.4], Polynomial.from_roots([1.3, -0.6]))
    ss = tf_to_ss(G)
    gains = stabilizing_gains(ss, [0.1, 0.2], [0.3, -0.2])
    J = controller_generator(ss, gains)
    for Q in (RationalTF(0.0), RationalTF(0.7), RationalTF([0.3, 0.1], [1.0, -0.4])):
        assert internal_stability(G, lft_lower(J, Q)).internally_stable


def test_ill_posed_lft():
    D = np.array([[0.0, 1.0], [1.0, 1.0]])
    gen = Partitioned(StateSpace(np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((2, 1)), D), 1, 1)
    with pytest.raises(IllPosedLFT):
        lft_lower(gen, 1.0)


def test_bad_partition():
    from dpslab.statespace import tracking_generalized_plant
    ss = StateSpace(np.eye(2) * 0.5, np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(BadPartition):
        tracking_generalized_plant(ss)


def test_json_round_trip():
    ss = tf_to_ss(RationalTF([1.0, 0.4], Polynomial.from_roots([1.3, -0.6])))
    back = StateSpace.from_json(ss.to_json())
    assert np.allclose(back.A, ss.A) and np.allclose(back.D, ss.D)


def test_norm_of_sensitivity_times_pulse_matches_l2_norm():
    S = RationalTF([1.0, -1.0], [1.0, 0.0])
    f = S * pulse_tf(1.0, 4)
    assert abs(h2_norm_gramian(tf_to_ss(f)) - l2_norm(f)) < 1e-12
