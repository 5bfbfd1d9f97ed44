import math

import numpy as np
import pytest

from dpslab.audit import internal_stability
from dpslab.errors import BadStart
from dpslab.optim import NelderMeadConfig, nelder_mead
from dpslab.policies import (Composite, Neural, PoleZero, StaticGain, policy_eval, policy_from_json,
                             published_neural, published_prestabilizer)
from dpslab.search import (LossSpec, evaluate_loss, prestabilize, prestabilized_plant, train_composite,
                           train_policy)
from dpslab.simulate import NoiseSpec, PulseSpec, make_pulse, simulate_loop
from dpslab.tf import RationalTF, is_stable
from dpslab.youla import FirstOrderProblem, closed_form_optimum

A = 1.1
G = RationalTF([1.0], [1.0, -A])
C1 = RationalTF([1.0, -A], [1.0, -1.0])
SYM = LossSpec((PulseSpec(1.0, 10), PulseSpec(-1.0, 10)))


class _Fixed:
    """Non-LTI wrapper forcing the sample-by-sample loss path."""

    def __init__(self, tf):
        self.tf = tf

    def stepper(self):
        from dpslab.simulate import LTIStepper
        return LTIStepper(self.tf)


def test_policy_eval_published_weights():
    nn = published_neural()
    assert abs(policy_eval(nn, 0, 0, 1) - 0.3169 * 3.1555) < 1e-12
    assert abs(policy_eval(nn, 0, 0, 1) - 1.0) < 1e-3
    assert abs(policy_eval(nn, 0, 0, -1) - (-1.5480 * 0.6460)) < 1e-12
    assert abs(policy_eval(nn, 0, 0, -1) + 1.0) < 1e-3


@pytest.mark.parametrize("pol", [published_neural(), StaticGain(0.7), PoleZero(0.6, (1.1,), (0.99,)),
                                 published_prestabilizer()])
def test_zero_input_gives_zero(pol):
    assert policy_eval(pol, 0.0, 0.0, 0.0) == 0.0


def test_pole_zero_step_matches_difference_equation():
    pz = PoleZero(0.6, (1.1,), (0.99,))
    u = policy_eval(pz, 0.5, 0.2, 0.3)
    assert abs(u - (0.99 * 0.5 + 0.6 * (0.3 - 1.1 * 0.2))) < 1e-15


def test_evaluate_loss_examples():
    C = closed_form_optimum(FirstOrderProblem()).C
    assert abs(evaluate_loss(C, G, SYM) - 2 * A * math.sqrt(2)) < 1e-6
    assert abs(evaluate_loss(C1, G, SYM) - 2 * math.sqrt(2)) < 1e-6
    # the stepped path agrees with the batched filter path
    assert abs(evaluate_loss(_Fixed(C1), G, SYM) - 2 * math.sqrt(2)) < 1e-6


def test_zero_policy_cost():
    # with u = 0 and no noise the plant output stays at zero, so e = r
    spec = LossSpec((PulseSpec(1.0, 1),), horizon=200)
    assert evaluate_loss(StaticGain(0.0), G, spec) == 1.0
    assert evaluate_loss(_Fixed(RationalTF(0.0)), G, spec) == 1.0
    # any disturbance at the plant input then grows like a^k and hits the cap
    noisy = LossSpec((PulseSpec(1.0, 1),), NoiseSpec("gaussian", 0.1, 0), horizon=200)
    assert evaluate_loss(StaticGain(0.0), G, noisy) == noisy.diverged_cost


def test_loss_is_deterministic_with_noise():
    spec = LossSpec(noise=NoiseSpec("gaussian", 0.1, 3, "at_reference_r"))
    pz = PoleZero(1.0, (1.1,), (0.5,))
    assert evaluate_loss(pz, G, spec) == evaluate_loss(pz, G, spec)
    assert evaluate_loss(pz, G, spec, run=1) != evaluate_loss(pz, G, spec)


def test_nelder_mead_sphere_and_rosenbrock():
    res = nelder_mead(lambda x: float(np.dot(x, x)), [3.0, 4.0])
    assert np.allclose(res.x, 0, atol=1e-6)
    rosen = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    res = nelder_mead(rosen, [-1.2, 1.0], NelderMeadConfig(restarts=1))
    assert np.allclose(res.x, [1, 1], atol=1e-4)
    assert res.f <= rosen(np.array([-1.2, 1.0]))


def test_nelder_mead_bad_start():
    with pytest.raises(BadStart):
        nelder_mead(lambda x: math.nan, [0.0])


def test_pole_zero_search_finds_the_cancelling_controller():
    spec = LossSpec(SYM.training_pulses, warmup_horizons=(10, 25, 50))
    pz, trace = train_policy(PoleZero(1.0, (0.5,), (0.5,)), G, spec, x0=[1.0, 0.5, 0.5])
    assert abs(pz.zeros[0] - A) < 0.01
    # on a finite pulse family the pole settles below 1 and the loss beats 2 sqrt(2)
    assert trace.final_cost < 2 * math.sqrt(2) and 0.8 < pz.poles[0] < 1.0
    v = internal_stability(G, pz.transfer_function())
    assert not v.internally_stable and abs(v.unstable_cancellations()[0].root - A) < 0.01


def test_prestabilize_static_gain():
    K = prestabilize(G).K
    assert abs(A - K) < 1
    # dense grid oracle for ||1/(1 + K/(z - a))||_2 = sqrt(1 + K^2/(1 - (a-K)^2))
    grid = np.linspace(0.11, 2.09, 200001)
    cost = np.sqrt(1 + grid ** 2 / (1 - (A - grid) ** 2))
    assert abs(K - grid[np.argmin(cost)]) < 1e-3
    assert abs(K - 0.1909) < 1e-3


def test_published_prestabilizer_is_stabilizing():
    res = simulate_loop(G, published_prestabilizer(), make_pulse(PulseSpec(1.0, 10), 200), NoiseSpec(), 200)
    assert not res.diverged and np.max(np.abs(res.y.samples[-20:])) < 1e-3


def test_zero_augmentation_is_the_prestabilizer():
    ps = StaticGain(prestabilize(G).K)
    comp = Composite(ps, Neural(np.zeros((2, 3)), np.zeros((1, 2))))
    assert comp.transfer_function() is None or internal_stability(G, comp.transfer_function()).internally_stable
    r = make_pulse(PulseSpec(1.0, 10), 100)
    a = simulate_loop(G, comp, r)
    b = simulate_loop(G, ps, r)
    assert np.array_equal(a.u.samples, b.u.samples)


def test_composite_training_short_run():
    ps = StaticGain(prestabilize(G).K)
    assert is_stable(prestabilized_plant(G, ps))[0]
    spec = LossSpec((PulseSpec(1.0, 10),), horizon=60)
    comp, trace = train_composite(G, ps, spec, NelderMeadConfig(max_iters=200, restarts=0), seed=0)
    assert trace.best_cost[-1] <= trace.best_cost[0]
    assert policy_from_json(comp.to_json()).to_dict() == comp.to_dict()
