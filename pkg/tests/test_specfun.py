import math

import numpy as np
import pytest

from epdlab.specfun import (SpecFunConfig, SpecFunOverflowError, bessel_k,
                            gamma_fn, h_eval, h_limit_constant)

from oracles import bessel_k_integral, bessel_k_scaled_integral, \
    first_derivative_fd5

NU_GRID = [0.0, 0.25, 0.5, 1.0, 2.3]
Z_GRID = np.geomspace(1e-3, 50.0, 40)


def test_gamma_basic_values():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(5.0) == 24.0
    assert math.isclose(gamma_fn(0.5), math.sqrt(math.pi), rel_tol=1e-15)


def test_gamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        gamma_fn(0.0)
    with pytest.raises(ValueError):
        gamma_fn(-1.5)


def test_bessel_matches_integral_oracle():
    for nu in NU_GRID:
        for z in Z_GRID:
            got = bessel_k(nu, float(z))
            want = bessel_k_integral(nu, float(z))
            assert got == pytest.approx(want, rel=1e-8), (nu, z)


def test_bessel_half_integer_closed_form():
    # K_{1/2}(z) = sqrt(pi/2z) e^{-z}
    for z in (0.1, 1.0, 7.0, 30.0):
        want = math.sqrt(0.5 * math.pi / z) * math.exp(-z)
        assert bessel_k(0.5, z) == pytest.approx(want, rel=1e-12)


def test_bessel_negative_order_symmetry():
    for z in (0.5, 3.0, 20.0):
        assert bessel_k(-1.3, z) == bessel_k(1.3, z)


def test_bessel_scaled_mode():
    for nu in (0.5, 2.3):
        for z in (1.0, 50.0, 800.0):
            got = bessel_k(nu, z, scaled=True)
            want = bessel_k_scaled_integral(nu, z)
            assert got == pytest.approx(want, rel=1e-9)


def test_bessel_scaled_huge_argument_finite():
    val = bessel_k(1.5, 1e6, scaled=True)
    assert math.isfinite(val) and val > 0.0


def test_bessel_three_term_recurrence():
    # K_{nu+1}(z) = K_{nu-1}(z) + (2 nu / z) K_nu(z)
    for nu in (0.3, 1.0, 2.3):
        for z in Z_GRID:
            z = float(z)
            lhs = bessel_k(nu + 1.0, z)
            rhs = bessel_k(nu - 1.0, z) + (2.0 * nu / z) * bessel_k(nu, z)
            assert lhs == pytest.approx(rhs, rel=1e-8), (nu, z)


def test_bessel_derivative_recurrence():
    # K_nu'(z) = -(K_{nu-1}(z) + K_{nu+1}(z)) / 2
    for nu in (0.3, 1.0, 2.3):
        for z in (0.5, 2.0, 10.0, 40.0):
            deriv = first_derivative_fd5(lambda x: bessel_k(nu, x), z,
                                         min(1e-3 * z, 0.01))
            want = -0.5 * (bessel_k(nu - 1.0, z) + bessel_k(nu + 1.0, z))
            assert deriv == pytest.approx(want, rel=1e-8), (nu, z)


def test_bessel_near_integer_order_continuous():
    for z in (0.5, 1.5):
        base = bessel_k(1.0, z)
        for nu in (1.0 - 1e-7, 1.0 + 1e-7):
            assert bessel_k(nu, z) == pytest.approx(base, rel=1e-5)


def test_bessel_rejects_nonpositive_argument():
    with pytest.raises(ValueError):
        bessel_k(0.5, 0.0)
    with pytest.raises(ValueError):
        bessel_k(0.5, -1.0)


def test_bessel_overflow_guard():
    with pytest.raises(SpecFunOverflowError):
        bessel_k(500.0, 1e-3)


def test_bessel_config_validation():
    with pytest.raises(ValueError):
        SpecFunConfig(rel_tol=1e-3)
    with pytest.raises(ValueError):
        SpecFunConfig(asymptotic_switch_z=-1.0)


def test_h_small_t_limit_constant():
    # -h'(t) + mu h(t)/t -> 2^{(mu-1)/2} Gamma((mu+1)/2) as t -> 0
    for mu in (1.0, 1.5, 2.0, 2.5):
        c0 = h_limit_constant(mu)
        prev_gap = None
        for t in (1e-2, 5e-3, 2.5e-3):
            ev = h_eval(t, mu)
            got = -ev.derivative + mu * ev.value / t
            gap = abs(got - c0)
            if prev_gap is not None:
                assert gap < prev_gap
            prev_gap = gap
        assert got == pytest.approx(c0, rel=1e-4)


def test_h_derivative_matches_fd():
    for mu in (1.0, 1.5, 2.5):
        for t in (0.3, 1.0, 4.0, 20.0):
            deriv = first_derivative_fd5(lambda x: h_eval(x, mu).value, t,
                                         1e-3 * t)
            assert h_eval(t, mu).derivative == pytest.approx(deriv, rel=1e-8)


def test_h_satisfies_ode_with_second_order_residual():
    # residual of h'' - (mu h / t)' - h under FD h'' shrinks at order ~2
    for mu in (1.0, 2.0, 2.5):
        t = 1.7
        residuals = []
        for step in (2e-2, 1e-2, 5e-3):
            em, e0, ep = (h_eval(t + s, mu) for s in (-step, 0.0, step))
            hpp = (ep.value - 2.0 * e0.value + em.value) / step ** 2
            res = hpp - (mu / t) * e0.derivative \
                + (mu / t ** 2) * e0.value - e0.value
            residuals.append(abs(res))
        order = math.log2(residuals[0] / residuals[2]) / 2.0
        assert 1.7 < order < 2.3, (mu, residuals)


def test_h_rejects_bad_inputs():
    with pytest.raises(ValueError):
        h_eval(0.0, 1.0)
    with pytest.raises(ValueError):
        h_eval(1.0, 0.0)
    with pytest.raises(ValueError):
        h_limit_constant(-1.0)
