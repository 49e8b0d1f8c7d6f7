"""Dual decomposition of the parametric problem ``max C - q T_f P_total``.

One inner iteration computes the per-(user, subcarrier) power maximizers for
the current multipliers, assigns every subcarrier to the user with the
largest Lagrangian contribution, and takes a projected subgradient step on
``lambda`` (power budget) and ``nu`` (per-user minimum EC).

Subgradient iterates are neither primal feasible nor monotone, so each
assignment they visit is turned into a feasible allocation: starving users
receive a subcarrier, then powers for that fixed assignment are solved
exactly from the KKT conditions. The best feasible allocation seen is
returned.

Channel gains are i.i.d. with unit mean, so every subcarrier looks the same
to a given user and a user's optimal power does not depend on ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from .effective_capacity import order_a, zero_power_slope
from .power_model import Allocation, SystemParams
from .special_functions import ConvergenceError, DomainError, scaled_and_log_slope


class InfeasibleError(RuntimeError):
    """No allocation meets the power budget and the per-user minimum EC."""


@dataclass(frozen=True)
class DualState:
    """Multipliers and the diminishing-step constants ``alpha / sqrt(j)``."""

    lam: float = 0.0
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alpha_lambda: Optional[float] = None
    alpha_nu: Optional[float] = None
    j: int = 1

    @classmethod
    def initial(cls, n_users: int, alpha_lambda=None, alpha_nu=None) -> "DualState":
        return cls(0.0, np.zeros(n_users), alpha_lambda, alpha_nu, 1)

    def restarted(self) -> "DualState":
        """Same multipliers and step constants with the step counter reset."""
        return replace(self, j=1)


@dataclass
class InnerConfig:
    max_inner: int = 500
    eps_lambda: float = 1e-6
    eps_nu: float = 0.5
    step_fraction: float = 0.01
    alpha_lambda: Optional[float] = None
    alpha_nu: Optional[float] = None
    newton_tol: float = 1e-12
    newton_max_iter: int = 200
    local_search_max_users: int = 20


@dataclass
class ParametricResult:
    allocation: Allocation
    dual: DualState
    f_value: float
    ec_per_user: np.ndarray
    kkt_lambda: float
    kkt_nu: np.ndarray
    inner_iterations: int
    dual_history: list

    def __iter__(self):
        return iter((self.allocation, self.dual, self.f_value))


def _price(lam: float, q: float, params: SystemParams) -> float:
    return lam + q * params.t_f * params.rho


def _ec_slope(thetas, p, params):
    """EC and d(EC)/dp per entry; ``thetas`` and ``p`` broadcast, p > 0."""
    thetas, p = np.broadcast_arrays(np.asarray(thetas, float), np.asarray(p, float))
    b = params.subcarrier_bandwidth
    x = params.n0 * b / p
    a = order_a(thetas, b, params)
    _, g, neg_log = scaled_and_log_slope(a.ravel(), x.ravel())
    c = (neg_log / thetas.ravel()).reshape(p.shape)
    dc = (g / (thetas.ravel() * p.ravel())).reshape(p.shape)
    return c, dc, g.reshape(p.shape), a, x


def user_term_ec(thetas, p, params):
    """Per-term EC for user thetas at powers p (arrays broadcast); 0 at p = 0."""
    thetas, p = np.broadcast_arrays(np.asarray(thetas, float), np.asarray(p, float))
    out = np.zeros(p.shape)
    on = p > 0
    if on.any():
        out[on] = _ec_slope(thetas[on], p[on], params)[0]
    return out


def per_term_objective(k, n, p, dual: DualState, q: float, thetas, params: SystemParams) -> float:
    """``(1 + nu_k) c_k(p) - (lambda + q T_f rho) p`` with c_k the per-term EC.

    Subcarriers are statistically identical so ``n`` does not enter.
    """
    if p < 0:
        raise DomainError("power must be non-negative")
    c = float(user_term_ec(thetas[k], p, params)) if p > 0 else 0.0
    return (1.0 + dual.nu[k]) * c - _price(dual.lam, q, params) * p


def newton_powers(thetas, weights, price: float, params: SystemParams, tol=1e-12, max_iter=200):
    """Maximizers over ``[0, P_max]`` of ``w_k c_k(p) - price p``, one per user.

    Solves ``log(w c'(p)) = log(price)`` in ``u = log p`` by Newton steps kept
    inside a bracket, with bisection when a step leaves it. Converged when
    ``|w c'(p) - price| <= tol * price``.
    """
    thetas = np.asarray(thetas, dtype=float)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), thetas.shape)
    p_max = params.p_max
    out = np.empty(thetas.shape)
    slope0 = zero_power_slope(params)
    dark = weights * slope0 <= price
    out[dark] = 0.0
    todo = ~dark
    if price > 0 and todo.any():
        _, dc_max, _, _, _ = _ec_slope(thetas[todo], np.full(todo.sum(), p_max), params)
        full = np.zeros(thetas.shape, dtype=bool)
        full[todo] = weights[todo] * dc_max >= price
        out[full] = p_max
        todo &= ~full
    else:
        out[todo] = p_max
        todo[:] = False
    if not todo.any():
        return out

    th = thetas[todo]
    w = weights[todo]
    log_price = math.log(price)
    hi = np.full(th.shape, math.log(p_max))
    lo = hi - 40.0

    def residual(u):
        c, dc, g, a, x = _ec_slope(th, np.exp(u), params)
        return np.log(w * dc) - log_price, g, a, x

    # Push the lower end down until the residual is positive there. If the
    # price is within rounding of the zero-power slope the maximizer is below
    # any representable power and is reported as zero.
    floor = hi - 690.0
    for _ in range(18):
        low_bad = residual(lo)[0] <= 0
        if not low_bad.any():
            break
        lo = np.where(low_bad, np.maximum(lo - 40.0, floor), lo)
        if np.all(lo[low_bad] == floor[low_bad]):
            low_bad = residual(lo)[0] <= 0
            break
    if low_bad.any():
        idx = np.flatnonzero(todo)
        out[idx[low_bad]] = 0.0
        todo[idx[low_bad]] = False
        keep = ~low_bad
        th, w, lo, hi = th[keep], w[keep], lo[keep], hi[keep]
        if not todo.any():
            return out

    u = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, g, a, x = residual(u)
        if np.all(np.abs(np.expm1(f)) <= tol):
            out[todo] = np.exp(u)
            return out
        lo = np.where(f > 0, u, lo)
        hi = np.where(f > 0, hi, u)
        # d/du log(c'(p)) = nu/G - (x + nu + 2 - G)
        deriv = a / g - (x + a + 2.0 - g)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = u - f / deriv
        ok = np.isfinite(step) & (deriv < 0) & (step > lo) & (step < hi)
        u = np.where(ok, step, 0.5 * (lo + hi))
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(u))):
            out[todo] = np.exp(u)
            return out
    raise ConvergenceError("Newton power iteration did not converge")


def newton_power(k, n, dual: DualState, q: float, thetas, params: SystemParams,
                 tol: float = 1e-12, max_iter: int = 200) -> float:
    """Maximizer ``p*`` of :func:`per_term_objective` for one (k, n) term."""
    price = _price(dual.lam, q, params)
    if price < 0:
        raise DomainError("lambda + q T_f rho must be non-negative")
    p = newton_powers(np.array([thetas[k]]), 1.0 + dual.nu[k], price, params, tol, max_iter)
    return float(p[0])


def assign_subcarriers(p_star, dual: DualState, q: float, thetas, params: SystemParams):
    """Binary K x N assignment: each column to its best user, or left idle.

    Columns are visited in order; ties go to the lowest user index. A column
    whose best metric is not positive stays dark.
    """
    p_star = np.asarray(p_star, dtype=float)
    k_users, n_sub = p_star.shape
    price = _price(dual.lam, q, params)
    metric = (1.0 + dual.nu[:, None]) * user_term_ec(
        np.asarray(thetas, float)[:, None], p_star, params
    ) - price * p_star
    phi = np.zeros((k_users, n_sub))
    for n in range(n_sub):
        best = int(np.argmax(metric[:, n]))
        if metric[best, n] > 0:
            phi[best, n] = 1.0
    return phi


def subgradient_update(dual: DualState, alloc: Allocation, ec_per_user, params: SystemParams) -> DualState:
    """Projected subgradient step with steps ``alpha / sqrt(j)``."""
    step = 1.0 / math.sqrt(dual.j)
    slack_p = params.p_max - alloc.transmit_power
    lam = max(0.0, dual.lam - dual.alpha_lambda * step * slack_p)
    nu = np.maximum(0.0, dual.nu + dual.alpha_nu * step * (params.c_min - np.asarray(ec_per_user)))
    return replace(dual, lam=lam, nu=nu, j=dual.j + 1)


def _auto_steps(dual, slack_p, slack_ec, q, params, cfg):
    """Base steps that turn the first subgradient into a 1% parameter move."""
    a_lam, a_nu = dual.alpha_lambda, dual.alpha_nu
    if a_lam is None:
        scale = max(dual.lam, q * params.t_f * params.rho, 1e-6 * zero_power_slope(params))
        a_lam = cfg.step_fraction * scale / max(abs(slack_p), 1e-12 * params.p_max)
    if a_nu is None:
        scale = max(float(np.max(dual.nu, initial=0.0)), 1.0)
        a_nu = cfg.step_fraction * scale / max(float(np.max(np.abs(slack_ec))), params.c_min)
    return replace(dual, alpha_lambda=a_lam, alpha_nu=a_nu)


class _FixedAssignment:
    """Exact power solution when the number of subcarriers per user is fixed."""

    def __init__(self, thetas, q, params, cfg):
        self.thetas = np.asarray(thetas, dtype=float)
        self.q = q
        self.params = params
        self.cfg = cfg
        self.mu0 = q * params.t_f * params.rho
        self._p_min = {}
        self._cache = {}

    def p_min(self, k, m):
        """Smallest power giving user k an EC of c_min over m subcarriers."""
        key = (k, m)
        if key not in self._p_min:
            target = self.params.c_min / m
            theta = self.thetas[k]

            def gap(u):
                return float(user_term_ec(theta, math.exp(u), self.params)) - target

            hi = math.log(self.params.p_max)
            if gap(hi) < 0:
                self._p_min[key] = math.inf
            else:
                lo = hi - 40.0
                while gap(lo) > 0:
                    lo -= 40.0
                u = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                # brentq may land a hair below the target; nudge to the feasible side
                p = math.exp(u)
                while user_term_ec(theta, p, self.params) < target:
                    p = np.nextafter(p, math.inf)
                self._p_min[key] = p
        return self._p_min[key]

    def _powers(self, users, counts, floors, lam):
        p_free = newton_powers(self.thetas[users], 1.0, self.mu0 + lam, self.params,
                               self.cfg.newton_tol, self.cfg.newton_max_iter)
        return np.maximum(p_free, floors)

    def solve(self, counts):
        """Return (F, powers per user, lambda, nu) or None when infeasible."""
        key = tuple(int(m) for m in counts)
        if key in self._cache:
            return self._cache[key]
        users = np.flatnonzero(np.asarray(key) > 0)
        k_users = len(key)
        if users.size < k_users:
            self._cache[key] = None
            return None
        m = np.asarray(key, dtype=float)[users]
        floors = np.array([self.p_min(k, key[k]) for k in users])
        p_max = self.params.p_max
        if not np.all(np.isfinite(floors)) or float(m @ floors) > p_max * (1 + 1e-12):
            self._cache[key] = None
            return None

        def total(lam):
            return float(m @ self._powers(users, m, floors, lam))

        lam = 0.0
        if total(0.0) > p_max:
            lam_hi = zero_power_slope(self.params)
            lam_lo = lam_hi * 1e-3
            while total(lam_lo) <= p_max:
                lam_lo *= 1e-3
            log_lam = optimize.brentq(
                lambda s: total(math.exp(s)) - p_max,
                math.log(lam_lo), math.log(lam_hi),
                xtol=1e-15, rtol=4 * np.finfo(float).eps,
            )
            lam = math.exp(log_lam)
            # stay inside the budget
            while total(lam) > p_max:
                lam = np.nextafter(lam, math.inf)
        p_users = self._powers(users, m, floors, lam)
        c, dc, _, _, _ = _ec_slope(self.thetas[users], p_users, self.params)
        price = self.mu0 + lam
        nu = np.zeros(k_users)
        pinned = p_users <= floors
        nu[users[pinned]] = np.maximum(price / dc[pinned] - 1.0, 0.0)
        ec = np.zeros(k_users)
        ec[users] = m * c
        p_full = np.zeros(k_users)
        p_full[users] = p_users
        f = float(ec.sum()) - self.q * self.params.t_f * (
            self.params.rho * float(m @ p_users) + self.params.p_c
        )
        result = (f, p_full, lam, nu, ec)
        self._cache[key] = result
        return result


def _repair(phi):
    """Give every user at least one subcarrier; None if N < K.

    Idle subcarriers are used first, then the last subcarrier of the user
    holding the most. Subcarriers are interchangeable, so which one moves
    does not change the value.
    """
    phi = phi.copy()
    k_users, n_sub = phi.shape
    if n_sub < k_users:
        return None
    for k in range(k_users):
        if phi[k].any():
            continue
        idle = np.flatnonzero(phi.sum(axis=0) == 0)
        if idle.size:
            col = idle[0]
        else:
            donor = int(np.argmax(phi.sum(axis=1)))
            col = np.flatnonzero(phi[donor])[-1]
            phi[donor, col] = 0.0
        phi[k, col] = 1.0
    return phi


def _counts(phi):
    return tuple(int(v) for v in phi.sum(axis=1))


def _phi_from_counts(counts, n_sub):
    """Contiguous blocks of subcarriers in user order."""
    phi = np.zeros((len(counts), n_sub))
    start = 0
    for k, m in enumerate(counts):
        phi[k, start:start + m] = 1.0
        start += m
    return phi


def _local_search(fixed, counts, best):
    """Move single subcarriers between users while the value improves."""
    counts = list(counts)
    k_users = len(counts)
    improved = True
    while improved:
        improved = False
        for donor in range(k_users):
            if counts[donor] <= 1:
                continue
            for rec in range(k_users):
                if rec == donor:
                    continue
                trial = counts.copy()
                trial[donor] -= 1
                trial[rec] += 1
                res = fixed.solve(trial)
                if res is not None and res[0] > best[0] + 1e-12 * max(1.0, abs(best[0])):
                    counts, best = trial, res
                    improved = True
                    break
            if improved:
                break
    return tuple(counts), best


def solve_parametric(q: float, thetas, params: SystemParams, dual_init: Optional[DualState] = None,
                     cfg: Optional[InnerConfig] = None) -> ParametricResult:
    """Solve ``max C - q T_f P_total`` over binary assignments and powers."""
    if q < 0:
        raise DomainError("q must be non-negative")
    if params.beta != 0.0:
        raise DomainError("the rate-dependent circuit term (beta > 0) is not supported")
    cfg = cfg or InnerConfig()
    thetas = np.asarray(thetas, dtype=float)
    k_users, n_sub = params.n_users, params.n_subcarriers
    if thetas.shape != (k_users,):
        raise DomainError("need one theta per user")
    if dual_init is None:
        dual_init = DualState.initial(k_users, cfg.alpha_lambda, cfg.alpha_nu)
    dual = dual_init.restarted()

    fixed = _FixedAssignment(thetas, q, params, cfg)
    best = None  # (f, counts, result)

    def consider(phi):
        nonlocal best
        repaired = _repair(phi)
        if repaired is None:
            return
        counts = _counts(repaired)
        res = fixed.solve(counts)
        if res is not None and (best is None or res[0] > best[0]):
            best = (res[0], counts, res)

    # Round-robin start.
    consider(np.eye(k_users)[np.arange(n_sub) % k_users].T)

    history = [(dual.lam, dual.nu.copy())]
    iters = 0
    for it in range(1, cfg.max_inner + 1):
        iters = it
        price = _price(dual.lam, q, params)
        p_user = newton_powers(thetas, 1.0 + dual.nu, price, params, cfg.newton_tol, cfg.newton_max_iter)
        p_star = np.repeat(p_user[:, None], n_sub, axis=1)
        phi = assign_subcarriers(p_star, dual, q, thetas, params)
        p_iter = np.where(phi > 0, p_star, 0.0)
        alloc = Allocation(p_iter, phi)
        ec = phi.sum(axis=1) * user_term_ec(thetas, p_user, params)
        if dual.alpha_lambda is None or dual.alpha_nu is None:
            dual = _auto_steps(dual, params.p_max - alloc.transmit_power,
                               params.c_min - ec, q, params, cfg)
        consider(phi)
        new = subgradient_update(dual, alloc, ec, params)
        history.append((new.lam, new.nu.copy()))
        done = abs(new.lam - dual.lam) <= cfg.eps_lambda and float(
            np.max(np.abs(new.nu - dual.nu))) <= cfg.eps_nu
        dual = new
        if done:
            break

    if best is None:
        raise InfeasibleError(
            f"no assignment meets P_max={params.p_max:g} W and C_min={params.c_min:g} "
            f"bits/frame for every user (K={k_users}, N={n_sub})"
        )
    counts, res = best[1], best[2]
    if k_users <= cfg.local_search_max_users:
        counts, res = _local_search(fixed, counts, res)

    f_value, p_full, lam, nu, ec = res
    phi = _phi_from_counts(counts, n_sub)
    p = phi * p_full[:, None]
    allocation = Allocation(p, phi)
    return ParametricResult(allocation, dual, f_value, ec, lam, nu, iters, history)
