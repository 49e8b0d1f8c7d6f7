import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eee_ofdma.special_functions import (
    ConvergenceError,
    DomainError,
    exp_integral_quadrature_oracle,
    exp_integral_scaled,
    exp_integral_scaled_ratio,
    scaled_and_log_slope,
)

# exp(x) E_nu(x) from mpmath at 50 digits via x^(nu-1) Gamma(1-nu, x)
MPMATH_VALUES = [
    (0.5, 0.001, 54.104656243624254),
    (1.0, 0.5, 0.92291063248373047),
    (2.5, 2.0, 0.24730255620295719),
    (3.2, 3e-05, 0.45453409236647971),
    (7.9999999, 0.25, 0.13718517017145965),
    (20.0, 1000.0, 0.00098041096754380377),
    (48.0, 40.0, 0.011433777160584018),
    (0.75, 1000.0, 0.00099925130890409623),
    (33.0, 0.9, 0.030369141264796891),
]


class TestExpIntegralScaled:
    @pytest.mark.parametrize("nu,x,expected", MPMATH_VALUES)
    def test_matches_mpmath(self, nu, x, expected):
        assert exp_integral_scaled(nu, x) == pytest.approx(expected, rel=1e-13)

    def test_order_one_is_scipy_exp1(self):
        from scipy import special

        x = np.geomspace(1e-6, 50, 40)
        assert np.allclose(exp_integral_scaled(1.0, x), np.exp(x) * special.exp1(x), rtol=1e-13)

    def test_integer_orders_match_scipy_expn(self):
        from scipy import special

        for n in (2, 3, 5, 10):
            x = np.geomspace(1e-4, 30, 25)
            assert np.allclose(exp_integral_scaled(float(n), x), np.exp(x) * special.expn(n, x), rtol=1e-12)

    def test_order_zero_closed_form(self):
        assert exp_integral_scaled(0.0, 4.0) == 0.25

    def test_near_integer_orders_continuous(self):
        for n in (1, 2, 7):
            for x in (1e-3, 0.4, 0.99):
                mid = exp_integral_scaled(float(n), x)
                lo = exp_integral_scaled(n - 1e-9, x)
                hi = exp_integral_scaled(n + 1e-9, x)
                assert abs(lo - mid) / mid < 1e-7
                assert abs(hi - mid) / mid < 1e-7

    def test_scalar_in_scalar_out(self):
        assert isinstance(exp_integral_scaled(1.5, 2.0), float)

    def test_array_broadcast(self):
        out = exp_integral_scaled(np.array([[1.5], [2.5]]), np.array([0.1, 1.0, 10.0]))
        assert out.shape == (2, 3)

    def test_large_argument_asymptote(self):
        # exp(x) E_nu(x) ~ 1/(x + nu) for x >> nu
        assert exp_integral_scaled(2.0, 1e12) == pytest.approx(1.0 / (1e12 + 2.0), rel=1e-12)

    @pytest.mark.parametrize("nu,x", [(-0.1, 1.0), (1.0, 0.0), (1.0, -1.0), (float("nan"), 1.0), (1.0, float("inf"))])
    def test_domain_errors(self, nu, x):
        with pytest.raises(DomainError):
            exp_integral_scaled(nu, x)


class TestRecurrence:
    def test_recurrence_residual(self):
        # nu E_{nu+1}(x) = exp(-x) - x E_nu(x), in scaled form nu S_{nu+1} = 1 - x S_nu
        rng = np.random.default_rng(5)
        nu = rng.uniform(0.5, 50, 200)
        x = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), 200))
        lhs = nu * exp_integral_scaled(nu + 1.0, x)
        rhs = 1.0 - x * exp_integral_scaled(nu, x)
        assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-9

    def test_ratio(self):
        nu, x = 3.7, 0.6
        expected = exp_integral_scaled(nu - 1, x) / exp_integral_scaled(nu, x)
        assert exp_integral_scaled_ratio(nu, x) == pytest.approx(expected, rel=1e-14)

    def test_ratio_domain(self):
        with pytest.raises(DomainError):
            exp_integral_scaled_ratio(1.0, 2.0)


class TestSlope:
    def test_slope_matches_finite_difference(self):
        nu = np.array([0.7, 3.2, 8.0, 40.0])
        for x0 in (1e-4, 0.3, 2.0, 300.0):
            x = np.full(4, x0)
            _, g, neg_log = scaled_and_log_slope(nu, x)
            h = 1e-5
            up = scaled_and_log_slope(nu, x * (1 + h))[2]
            dn = scaled_and_log_slope(nu, x * (1 - h))[2]
            # G = x d/dx log(x S) = -x dL/dx
            fd = -(up - dn) / (2 * h)
            assert np.allclose(g, fd, rtol=1e-6, atol=1e-12)

    def test_neg_log_small_for_large_x(self):
        # -log(x S) ~ nu / x with no cancellation
        _, _, neg_log = scaled_and_log_slope(np.array([3.0]), np.array([1e12]))
        assert neg_log[0] == pytest.approx(3.0e-12, rel=1e-9)


class TestQuadratureOracle:
    def test_agrees_with_mpmath(self):
        for nu, x, expected in MPMATH_VALUES[:5]:
            assert exp_integral_quadrature_oracle(nu, x) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("tol", [1e-3, 1e-30])
    def test_bad_tolerance(self, tol):
        with pytest.raises(DomainError):
            exp_integral_quadrature_oracle(1.0, 1.0, tol=tol)

    def test_reports_failure(self, monkeypatch):
        from scipy import integrate

        def noisy(*args, **kwargs):
            return 1.0, 1.0  # error estimate as large as the value

        monkeypatch.setattr(integrate, "quad", noisy)
        with pytest.raises(ConvergenceError):
            exp_integral_quadrature_oracle(1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(1e-6, 1e6))
def test_classical_bounds(nu, x):
    # 1/(x + nu) < S <= 1/(x + nu - 1) for nu >= 1
    s = exp_integral_scaled(nu, x)
    assert s > 1.0 / (x + nu) * (1 - 1e-13)
    assert s <= 1.0 / (x + nu - 1.0) * (1 + 1e-13)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 100.0), st.floats(1e-5, 1e5))
def test_decreasing_in_order(nu, x):
    assert exp_integral_scaled(nu + 0.5, x) < exp_integral_scaled(nu, x)
