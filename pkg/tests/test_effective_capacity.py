import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eee_ofdma.effective_capacity import (
    ec_integrand_expectation,
    ergodic_rate,
    mc_effective_capacity,
    mc_ergodic_rate,
    relaxed_term_ec,
    term_ec,
    total_ec,
    user_ec,
    zero_power_slope,
)
from eee_ofdma.power_model import SystemParams
from eee_ofdma.special_functions import DomainError

# E[exp(-theta r)] by scipy quadrature over the exponential gain law,
# and the matching -ln(I)/theta; (theta, p, b, I, ec)
QUADRATURE_VALUES = [
    (0.1, 0.001, 33333.333333333336, 1.5098991908309212e-05, 111.00882577411137),
    (0.25, 0.005, 33333.333333333336, 9.49804578982585e-07, 55.468038319385585),
    (0.1, 2e-05, 33333.333333333336, 0.0007539342328284745, 71.90205418126003),
    (0.25, 0.001, 50000.0, 4.533697888193884e-06, 49.21589056244102),
    (1.0, 0.5, 33333.333333333336, 2.1452837782904085e-09, 19.959993995745698),
]


class TestIntegrandExpectation:
    @pytest.mark.parametrize("theta,p,b,i_ref,_", QUADRATURE_VALUES)
    def test_matches_quadrature(self, scenario1, theta, p, b, i_ref, _):
        assert ec_integrand_expectation(theta, p, b, scenario1) == pytest.approx(i_ref, rel=1e-7)

    def test_huge_power(self, scenario1):
        assert ec_integrand_expectation(0.1, 1e12, 1e5 / 3, scenario1) < 1e-3

    def test_in_unit_interval_and_decreasing(self, scenario1):
        p = np.geomspace(1e-9, 1.0, 30)
        vals = [ec_integrand_expectation(0.25, pi, 1e5 / 3, scenario1) for pi in p]
        assert all(0 < v <= 1 for v in vals)
        assert np.all(np.diff(vals) < 0)

    def test_monte_carlo_mean(self, scenario1):
        theta, p, b = 1.0, 1e-6, 1e5 / 3
        rng = np.random.default_rng(11)
        g = rng.standard_exponential(10**6)
        r = scenario1.t_f * b * np.log2(1 + g * p / (scenario1.n0 * b))
        y = np.exp(-theta * r)
        se = y.std(ddof=1) / math.sqrt(y.size)
        assert abs(y.mean() - ec_integrand_expectation(theta, p, b, scenario1)) < 3 * se

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -1.0)])
    def test_domain(self, scenario1, args):
        with pytest.raises(DomainError):
            ec_integrand_expectation(*args, scenario1)


class TestUserEc:
    def test_empty_row(self, scenario1):
        assert user_ec(0.1, [0, 0, 0], [0, 0, 0], scenario1) == 0.0

    def test_single_subcarrier_quadrature(self, scenario1):
        theta, p, _, _, ec_ref = QUADRATURE_VALUES[0]
        assert user_ec(theta, [1, 0, 0], [p, 0, 0], scenario1) == pytest.approx(ec_ref, rel=1e-7)

    def test_relaxed_agrees_with_binary(self, scenario1):
        phi = np.array([1.0, 0.4, 0.0])
        p = np.array([2e-3, 5e-3, 0.0])
        assert user_ec(0.25, phi, p, scenario1, relaxed=True) == pytest.approx(
            user_ec(0.25, phi, p, scenario1), rel=1e-12)

    def test_assigned_without_power(self, scenario1):
        with pytest.raises(DomainError):
            user_ec(0.1, [1, 0, 0], [0, 0, 0], scenario1)

    def test_small_theta_ergodic_limit(self, scenario1):
        p = 1e-3
        mean, se = mc_ergodic_rate(p, scenario1, 10**6, seed=3)
        ec = user_ec(1e-6, [1, 0, 0], [p, 0, 0], scenario1)
        assert abs(ec - mean) / mean < 0.01

    def test_guard_below_threshold(self, scenario1):
        # below 1e-8 the ergodic rate is returned directly
        assert user_ec(1e-9, [1, 0, 0], [1e-3, 0, 0], scenario1) == pytest.approx(
            float(ergodic_rate(1e-3, scenario1.subcarrier_bandwidth, scenario1)), rel=1e-14)
        assert user_ec(2e-8, [1, 0, 0], [1e-3, 0, 0], scenario1) == pytest.approx(
            user_ec(1e-9, [1, 0, 0], [1e-3, 0, 0], scenario1), rel=1e-6)

    def test_zero_power_slope(self, scenario1):
        p = 1e-15
        c = float(term_ec(0.25, p, scenario1))
        assert c / p == pytest.approx(zero_power_slope(scenario1), rel=1e-3)


class TestTotalEc:
    def test_single_user(self):
        prm = SystemParams(1, 2, 1e5)
        phi = np.array([[1.0, 1.0]])
        p = np.array([[1e-3, 2e-3]])
        assert total_ec([0.3], phi, p, prm) == user_ec(0.3, phi[0], p[0], prm)

    def test_user_permutation(self, scenario1):
        phi = np.array([[1, 1, 0], [0, 0, 1]], float)
        p = np.array([[1e-3, 2e-3, 0], [0, 0, 4e-3]])
        a = total_ec([0.1, 0.25], phi, p, scenario1)
        b = total_ec([0.25, 0.1], phi[::-1], p[::-1], scenario1)
        assert a == pytest.approx(b, rel=1e-15)

    def test_scenario2_sum_of_quadrature_users(self, scenario2):
        # B = 50 kHz; user 2 entry from the quadrature table
        phi = np.eye(2)
        p = np.diag([1e-3, 1e-3])
        ec_user2 = QUADRATURE_VALUES[3][4]
        ec_user1 = user_ec(0.1, phi[0], p[0], scenario2)
        assert total_ec([0.1, 0.25], phi, p, scenario2) == pytest.approx(ec_user1 + ec_user2, rel=1e-7)

    def test_shape_mismatch(self, scenario1):
        with pytest.raises(DomainError):
            total_ec([0.1], np.zeros((2, 3)), np.zeros((2, 3)), scenario1)


class TestRelaxed:
    def test_perspective(self, scenario1):
        phi, p = 0.3, 4e-3
        assert relaxed_term_ec(0.1, phi, phi * p, scenario1) == pytest.approx(
            phi * float(term_ec(0.1, p, scenario1)), rel=1e-13)

    def test_zero_fraction(self, scenario1):
        assert relaxed_term_ec(0.1, 0.0, 0.0, scenario1) == 0.0


class TestMonteCarlo:
    def test_agrees_with_closed_form(self, scenario1):
        phi = np.array([1.0, 1.0, 0.0])
        p = np.array([1e-3, 3e-3, 0.0])
        est, se = mc_effective_capacity(0.1, phi, p, scenario1, 10**6, seed=2)
        assert abs(est - user_ec(0.1, phi, p, scenario1)) < 3 * se

    def test_plain_sampling_in_benign_regime(self):
        prm = SystemParams(1, 1, 1e3)  # A well below 1
        est, se = mc_effective_capacity(0.5, [1.0], [1e-8], prm, 10**6, seed=4, importance=False)
        assert abs(est - user_ec(0.5, [1.0], [1e-8], prm)) < 3 * se

    def test_standard_error_scaling(self, scenario1):
        _, se1 = mc_effective_capacity(0.25, [1, 0, 0], [2e-3, 0, 0], scenario1, 10**5, seed=1)
        _, se2 = mc_effective_capacity(0.25, [1, 0, 0], [2e-3, 0, 0], scenario1, 2 * 10**5, seed=1)
        assert se2 / se1 == pytest.approx(1 / math.sqrt(2), rel=0.1)

    def test_zero_power_rejected(self, scenario1):
        with pytest.raises(DomainError):
            mc_effective_capacity(0.1, [1, 0, 0], [0, 0, 0], scenario1, 10**4)

    def test_sample_floor(self, scenario1):
        with pytest.raises(DomainError):
            mc_effective_capacity(0.1, [1, 0, 0], [1e-3, 0, 0], scenario1, 100)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(1e-7, 1.0))
def test_decreasing_in_theta(t1, t2, p):
    prm = SystemParams(2, 3, 1e5)
    lo, hi = sorted((t1, t2))
    if hi - lo < 1e-6:
        return
    assert float(term_ec(lo, p, prm)) > float(term_ec(hi, p, prm))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(1e-8, 0.5), st.floats(1.01, 2.0))
def test_increasing_in_power(theta, p, factor):
    prm = SystemParams(2, 3, 1e5)
    assert float(term_ec(theta, p * factor, prm)) > float(term_ec(theta, p, prm))
