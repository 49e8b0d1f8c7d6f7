import math

import mpmath
import numpy as np
import pytest

from eee_ofdma.effective_capacity import order_a, term_ec, zero_power_slope
from eee_ofdma.inner_solver import (
    DualState,
    InfeasibleError,
    InnerConfig,
    assign_subcarriers,
    newton_power,
    newton_powers,
    per_term_objective,
    solve_parametric,
    subgradient_update,
)
from eee_ofdma.power_model import Allocation, SystemParams
from eee_ofdma.special_functions import DomainError

mpmath.mp.dps = 40


def _mp_slope(theta, p, prm):
    """d/dp of -ln(x e^x E_A(x)) / theta, x = N0 B / p, at 40 digits."""
    b = prm.subcarrier_bandwidth
    a = mpmath.mpf(order_a(theta, b, prm))
    nb = mpmath.mpf(prm.n0) * b

    def c(pp):
        x = nb / pp
        return -mpmath.log(x * mpmath.exp(x) * mpmath.expint(a, x)) / theta

    return float(mpmath.diff(c, mpmath.mpf(p)))


def _dual(nu, lam=0.0):
    return DualState(lam, np.asarray(nu, float), 1.0, 1.0, 1)


class TestPerTerm:
    def test_zero_power(self, scenario1, thetas):
        assert per_term_objective(0, 0, 0.0, _dual([0.3, 0.0], 5.0), 1e6, thetas, scenario1) == 0.0

    def test_concave_in_power(self, scenario1, thetas):
        p = np.geomspace(1e-7, 1.0, 200)
        h = np.array([per_term_objective(1, 0, x, _dual([0, 0], 10.0), 0.0, thetas, scenario1) for x in p])
        # concavity on a non-uniform grid: slopes decrease
        s = np.diff(h) / np.diff(p)
        assert np.all(np.diff(s) <= 1e-9 * np.abs(s[:-1]).max())

    def test_negative_power(self, scenario1, thetas):
        with pytest.raises(DomainError):
            per_term_objective(0, 0, -1.0, _dual([0, 0]), 0.0, thetas, scenario1)


class TestNewton:
    @pytest.mark.parametrize("k,nu,lam,q", [(0, 0.0, 0.0, 2e6), (1, 0.5, 0.0, 3e6), (0, 0.0, 50.0, 0.0),
                                            (1, 2.0, 1.0, 1e6)])
    def test_stationarity_against_mpmath(self, scenario1, thetas, k, nu, lam, q):
        dual = _dual([nu, nu], lam)
        p = newton_power(k, 0, dual, q, thetas, scenario1)
        assert 0 < p < scenario1.p_max
        price = lam + q * scenario1.t_f * scenario1.rho
        slope = _mp_slope(thetas[k], p, scenario1)
        assert abs((1 + nu) * slope - price) / price <= 1e-8

    def test_dark_above_zero_power_slope(self, scenario1, thetas):
        lam = 2 * zero_power_slope(scenario1)
        assert newton_power(0, 0, _dual([0, 0], lam), 0.0, thetas, scenario1) == 0.0

    def test_full_power_at_zero_price(self, scenario1, thetas):
        assert newton_power(0, 0, _dual([0, 0]), 0.0, thetas, scenario1) == scenario1.p_max

    def test_vectorized_matches_scalar(self, scenario1):
        th = np.array([0.05, 0.1, 0.5, 2.0])
        price = 0.5 * zero_power_slope(scenario1) * 1e-3
        vec = newton_powers(th, 1.0, price, scenario1)
        for t, v in zip(th, vec):
            assert newton_powers(np.array([t]), 1.0, price, scenario1)[0] == v

    def test_decreasing_in_price(self, scenario1):
        prices = np.geomspace(1e-1, 1e3, 12)
        p = [newton_powers(np.array([0.25]), 1.0, pr, scenario1)[0] for pr in prices]
        assert np.all(np.diff(p) <= 0)

    def test_negative_price(self, scenario1, thetas):
        with pytest.raises(DomainError):
            newton_power(0, 0, _dual([0, 0], -10.0), 0.0, thetas, scenario1)


class TestAssignment:
    def test_symmetric_users(self, scenario1):
        th = np.array([0.2, 0.2])
        p = np.full((2, 3), 1e-3)
        phi = assign_subcarriers(p, _dual([0, 0]), 1e6, th, scenario1)
        # equal metrics: lowest index wins every column
        assert phi.tolist() == [[1, 1, 1], [0, 0, 0]]

    def test_prefers_looser_qos(self, scenario1, thetas):
        p = np.full((2, 3), 1e-3)
        phi = assign_subcarriers(p, _dual([0, 0]), 1e6, thetas, scenario1)
        assert phi[0].sum() == 3

    def test_dual_weight_moves_columns(self, scenario1, thetas):
        p = np.full((2, 3), 1e-3)
        phi = assign_subcarriers(p, _dual([0, 5.0]), 1e6, thetas, scenario1)
        assert phi[1].sum() == 3

    def test_idle_when_not_profitable(self, scenario1, thetas):
        p = np.full((2, 3), 1.0)
        phi = assign_subcarriers(p, _dual([0, 0], 1e6), 0.0, thetas, scenario1)
        assert not phi.any()


class TestSubgradient:
    def test_signs(self, scenario1):
        dual = DualState(1.0, np.array([1.0, 1.0]), 1.0, 1.0, 1)
        over = Allocation(np.full((2, 3), 0.5), np.array([[1, 1, 0], [0, 0, 1.0]]))
        new = subgradient_update(dual, over, [0.5, 10.0], scenario1)
        assert new.lam > dual.lam  # budget exceeded
        assert new.nu[0] > 1.0 and new.nu[1] < 1.0
        assert new.j == 2

    def test_projection(self, scenario1):
        dual = DualState(0.0, np.zeros(2), 1.0, 1.0, 1)
        new = subgradient_update(dual, Allocation.zeros(scenario1), [1e3, 1e3], scenario1)
        assert new.lam == 0.0 and np.all(new.nu == 0.0)


@pytest.fixture(scope="module")
def results():
    prm = SystemParams(2, 3, 1e5)
    th = np.array([0.1, 0.25])
    qs = [0.0, 1e6, 3e6, 3.8e6, 5e6, 1e7]
    return prm, th, qs, [solve_parametric(q, th, prm) for q in qs]


class TestParametric:

    def test_f_positive_at_zero(self, results):
        assert results[3][0].f_value > 0

    def test_f_decreasing(self, results):
        f = [r.f_value for r in results[3]]
        assert np.all(np.diff(f) < 0)

    def test_f_negative_above_optimum(self, results):
        assert results[3][-1].f_value < 0

    def test_budget_and_qos(self, results):
        prm = results[0]
        for r in results[3]:
            assert r.allocation.transmit_power <= prm.p_max + 1e-9
            assert np.all(r.ec_per_user >= prm.c_min * (1 - 1e-9))
            assert r.allocation.phi.sum(axis=0).max() <= 1

    def test_duals_nonnegative(self, results):
        for r in results[3]:
            assert r.kkt_lambda >= 0 and np.all(r.kkt_nu >= 0)
            for lam, nu in r.dual_history:
                assert lam >= 0 and np.all(nu >= 0)

    def test_f_matches_allocation(self, results):
        prm, th, qs, res = results
        for q, r in zip(qs, res):
            ptot = prm.rho * r.allocation.transmit_power + prm.p_c
            assert r.f_value == pytest.approx(r.ec_per_user.sum() - q * prm.t_f * ptot, rel=1e-9, abs=1e-6)

    def test_unpacking(self, results):
        alloc, dual, f = results[3][0]
        assert f == results[3][0].f_value

    def test_infeasible(self):
        prm = SystemParams(2, 3, 1e5, p_max=1e-12, c_min=1e4)
        with pytest.raises(InfeasibleError):
            solve_parametric(0.0, [0.1, 0.25], prm, cfg=InnerConfig(max_inner=20))

    def test_negative_q(self, scenario1, thetas):
        with pytest.raises(DomainError):
            solve_parametric(-1.0, thetas, scenario1)
