import math

import numpy as np
import pytest

from dpslab.errors import BadHorizon, IllPosedLoop, Improper, NoGrowth
from dpslab.simulate import (NoiseSpec, PulseSpec, filter_signal, growth_rate, l2_truncated, linf_truncated,
                             make_pulse, noise_sequence, simulate_batch, simulate_loop)
from dpslab.tf import RationalTF
from dpslab.youla import FirstOrderProblem, closed_form_optimum

A = 1.1
G = RationalTF([1.0], [1.0, -A])
C1 = RationalTF([1.0, -A], [1.0, -1.0])


def test_pulses():
    assert make_pulse(PulseSpec(1.0, 3), 6).tolist() == [1, 1, 1, 0, 0, 0]
    assert make_pulse(PulseSpec(-0.5, 1), 3).tolist() == [-0.5, 0, 0]
    with pytest.raises(BadHorizon):
        make_pulse(PulseSpec(1.0, 5), 4)
    with pytest.raises(ValueError):
        PulseSpec(1.0, 0)


def test_filters():
    assert filter_signal(RationalTF([1.0], [1.0, 0.0]), [1.0, 0.0, 0.0]).tolist() == [0, 1, 0]
    imp = np.zeros(5)
    imp[0] = 1.0
    assert np.allclose(filter_signal(G, imp).samples, [0, 1, 1.1, 1.21, 1.331])
    out = filter_signal(RationalTF([1.0, -1.0], [1.0, 0.0]), make_pulse(PulseSpec(1.0, 3), 8))
    assert out.tolist()[:5] == [1, 0, 0, -1, 0]
    assert abs(l2_truncated(out) - math.sqrt(2)) < 1e-15
    with pytest.raises(Improper):
        filter_signal(RationalTF([1.0, 0.0], [1.0]), imp)


def test_norms():
    assert abs(l2_truncated([1, 0, 0, -1]) - math.sqrt(2)) < 1e-15
    assert linf_truncated([0.3, -0.7, 0.2]) == 0.7
    assert abs(l2_truncated(make_pulse(PulseSpec(1.0, 10), 10)) - math.sqrt(10)) < 1e-15


def test_growth_rate():
    k = np.arange(40)
    assert abs(growth_rate(1.1 ** k, 10) - 1.1) < 1e-3
    assert abs(growth_rate(0.9 ** k, 10) - 0.9) < 1e-3
    with pytest.raises(NoGrowth):
        growth_rate(np.zeros(30), 10)


def test_optimal_loop_cost():
    C = closed_form_optimum(FirstOrderProblem()).C
    res = simulate_loop(G, C, make_pulse(PulseSpec(1.0, 10), 100))
    assert not res.diverged
    assert abs(l2_truncated(res.e) - A * math.sqrt(2)) < 1e-6


def test_super_optimal_loop_cost():
    res = simulate_loop(G, C1, make_pulse(PulseSpec(1.0, 10), 100))
    assert abs(l2_truncated(res.e) - math.sqrt(2)) < 1e-6


def test_fragile_loop_diverges_under_control_noise():
    res = simulate_loop(G, C1, make_pulse(PulseSpec(1.0, 10), 200), NoiseSpec("gaussian", 0.1, 1), 200)
    assert res.diverged and res.divergence_step < 200
    assert abs(res.growth_ratio - A) < 0.02
    # u deviates from the nominal run only by the delayed noise sample
    nominal = simulate_loop(G, C1, make_pulse(PulseSpec(1.0, 10), 200))
    n = res.divergence_step
    assert np.max(np.abs(res.u.samples[:n] - nominal.u.samples[:n])) <= np.max(np.abs(res.w.samples)) + 1e-9


def test_improper_plant_rejected():
    with pytest.raises(IllPosedLoop):
        simulate_loop(RationalTF([1.0, 0.0], [1.0, -0.5]), C1, np.ones(5))


def test_noise_is_reproducible_and_seeded():
    a = noise_sequence(NoiseSpec("gaussian", 0.1, 7), 500)
    b = noise_sequence(NoiseSpec("gaussian", 0.1, 7), 500)
    c = noise_sequence(NoiseSpec("gaussian", 0.1, 8), 500)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert abs(np.std(a) - 0.1) < 0.015
    s = noise_sequence(NoiseSpec("binary", 0.1, 3), 200)
    assert set(np.round(s, 12)) == {-0.1, 0.1}
    assert not noise_sequence(NoiseSpec(), 10).any()


def test_fast_and_stepped_paths_agree():
    C = closed_form_optimum(FirstOrderProblem()).C
    r = make_pulse(PulseSpec(1.0, 10), 150)
    for noise in (NoiseSpec("gaussian", 0.1, 1), NoiseSpec("gaussian", 0.1, 1, "at_reference_r")):
        a = simulate_loop(G, C, r, noise, 150)
        b = simulate_loop(G, C, r, noise, 150, fast=True)
        assert np.allclose(a.e.samples, b.e.samples, atol=1e-10)
        assert np.allclose(a.u.samples, b.u.samples, atol=1e-10)


def test_batch_matches_single_runs():
    from dpslab.policies import published_neural
    pol = published_neural()
    R = np.vstack([make_pulse(PulseSpec(r0, 5), 60).samples for r0 in (1.0, -1.0, 0.5)])
    W = np.vstack([noise_sequence(NoiseSpec("gaussian", 0.01, s), 60) for s in range(3)])
    E, U, Y = simulate_batch(G, pol, R, W, True)
    for i in range(3):
        res = simulate_loop(G, pol, R[i], NoiseSpec("gaussian", 0.01, i), 60)
        assert np.allclose(res.e.samples, E[i], atol=1e-12)


def test_csv_columns(tmp_path):
    res = simulate_loop(G, C1, make_pulse(PulseSpec(1.0, 3), 10))
    path = tmp_path / "t.csv"
    res.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,r,w,e,u,y" and len(lines) == 11
