import math

import numpy as np
import pytest

from dpslab.errors import DegenerateLoop, Diverged, NoRoots, PoleHit, UnstableNorm
from dpslab.tf import (Polynomial, RationalTF, cancel_common_roots, evaluate, impulse_response, is_inner,
                       is_stable, l2_norm, poly_roots, rational_arith, tf_from_text, z_tf)

A = 1.1


def test_roots_linear_factor():
    assert np.allclose(poly_roots(Polynomial([1.0, -1.1])).roots, [1.1])


def test_roots_unit_quadratic():
    r = poly_roots(Polynomial([1.0, 0.0, 1.0])).roots
    assert np.allclose(sorted(r, key=lambda z: z.imag), [-1j, 1j], atol=1e-12)


def test_roots_fragile_characteristic_polynomial():
    r = poly_roots(Polynomial([1.0, -A, 0.0])).roots
    assert np.allclose(sorted(r.real), [0.0, A], atol=1e-12)
    assert np.all(r.imag == 0)


def test_roots_repeated_and_conjugate_symmetric():
    p = Polynomial.from_roots([0.9, 0.9, 0.9, 0.5 + 0.5j, 0.5 - 0.5j])
    r = poly_roots(p).roots
    assert np.allclose(np.sort_complex(r), np.sort_complex(np.conj(r)))
    assert np.allclose(Polynomial.from_roots(r).coeffs, p.coeffs, atol=1e-10)


def test_roots_degree_zero_raises():
    with pytest.raises(NoRoots):
        poly_roots(Polynomial([3.0]))


def test_roots_divergence_carries_best_iterate(monkeypatch):
    import dpslab.tf as tfmod
    monkeypatch.setattr(tfmod, "MAX_ROOT_ITERS", 0)
    with pytest.raises(Diverged) as exc:
        poly_roots(Polynomial([1.0, 0.3, -2.0, 0.7]), tol=1e-300)
    assert exc.value.best is not None


def test_feedback_keeps_unstable_common_root():
    G = RationalTF([1.0], [1.0, -A])
    C1 = RationalTF([1.0, -A], [1.0, -1.0])
    T = rational_arith("feedback", 1.0, G * C1)
    assert T.num.allclose(Polynomial([1.0, -A]) * Polynomial([1.0, -1.0]))
    assert T.den.allclose(Polynomial([1.0, -A]) * Polynomial([1.0, 0.0]))


def test_add_identity():
    f = RationalTF([1.0], [1.0, 0.0])
    g = rational_arith("add", f, 0.0)
    assert g.num.allclose(f.num) and g.den.allclose(f.den)


def test_product_is_uncancelled():
    S = RationalTF([1.0, -1.0], [1.0, 0.0])
    R = RationalTF([1.0, 0.0, -1.0], Polynomial([1.0, -1.0]) * Polynomial([1.0, 0.0]))
    P = rational_arith("mul", S, R)
    assert P.den.degree == 3
    red, cancelled = cancel_common_roots(P)
    assert np.allclose(cancelled, [1.0])
    # a double root is only resolved to about sqrt(eps)
    assert np.allclose(red.normalized().num.coeffs, [1.0, 0.0, -1.0], atol=1e-7)
    assert np.allclose(red.normalized().den.coeffs, [1.0, 0.0, 0.0], atol=1e-7)


def test_degenerate_division():
    with pytest.raises(DegenerateLoop):
        rational_arith("div", RationalTF(1.0), RationalTF(0.0))


def test_stability_examples():
    ok, bad = is_stable(RationalTF([1.0], [1.0, -A]))
    assert not ok and np.allclose(bad, [A])
    assert is_stable(RationalTF([1.0, -1.0], [1.0, 0.0]))[0]
    ok, bad = is_stable(RationalTF([1.0, -1.0], Polynomial([1.0, 0.0]) * Polynomial([1.0, -A])))
    assert not ok and np.allclose(bad, [A])


def test_stability_after_cancellation_hides_the_common_root():
    f = RationalTF(Polynomial.from_roots([A]), Polynomial.from_roots([A, 0.0]))
    assert not is_stable(f, "as_written")[0]
    assert is_stable(f, "after_cancellation")[0]


def test_unit_circle_pole_is_unstable():
    assert not is_stable(RationalTF([1.0], [1.0, -1.0]))[0]


def test_evaluate_optimal_sensitivity():
    S = RationalTF(A * (Polynomial([1.0, -A]) * Polynomial([1.0, -1.0])), Polynomial([A, -1.0]) * Polynomial([1.0, 0.0]))
    assert abs(evaluate(S, A)) < 1e-12
    assert abs(evaluate(S, math.inf) - 1.0) < 1e-12
    assert abs(evaluate(RationalTF([1.0, -1.0], [1.0, 0.0]), 1.0)) < 1e-15


def test_evaluate_at_pole():
    with pytest.raises(PoleHit) as exc:
        evaluate(RationalTF([1.0], [1.0, -0.5]), 0.5)
    assert abs(exc.value.pole - 0.5) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 7, 30])
def test_l2_of_pulse_difference(n):
    den = np.zeros(n + 1)
    den[0] = 1.0
    num = den.copy()
    num[-1] = -1.0
    assert abs(l2_norm(RationalTF(num, den)) - math.sqrt(2)) < 1e-12


def test_l2_delay_and_optimal_cost():
    from dpslab.youla import pulse_tf
    assert abs(l2_norm(1 / z_tf()) - 1.0) < 1e-14
    S = RationalTF(A * (Polynomial([1.0, -A]) * Polynomial([1.0, -1.0])), Polynomial([A, -1.0]) * Polynomial([1.0, 0.0]))
    assert abs(l2_norm(S * pulse_tf(1.0, 10)) - 1.555635) < 1e-6


def test_l2_rejects_unstable():
    with pytest.raises(UnstableNorm):
        l2_norm(RationalTF([1.0], [1.0, -A]))
    with pytest.raises(UnstableNorm):
        l2_norm(RationalTF([1.0, 0.0, 0.0], [1.0, 0.0]))


def test_inner_examples():
    assert is_inner(RationalTF([1.0, -A], [A, -1.0]))
    assert is_inner(1 / z_tf())
    assert not is_inner(RationalTF([1.0], [1.0, -0.5]))


def test_impulse_response_of_unstable_first_order():
    h = impulse_response(RationalTF([1.0], [1.0, -A]), 5)
    assert np.allclose(h, [0.0, 1.0, 1.1, 1.21, 1.331])


def test_text_round_trip():
    f = tf_from_text("1.31 -1.21 | 1.1 -1.1")
    g = tf_from_text(f.to_text())
    assert g.num.allclose(f.num) and g.den.allclose(f.den)
    p = tf_from_text("1 2 3")
    assert p.den.degree == 0 and p.num.degree == 2
    with pytest.raises(ValueError):
        tf_from_text("1 x | 2")
