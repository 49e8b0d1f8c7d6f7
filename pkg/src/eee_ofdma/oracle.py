"""Brute-force ground truth for small systems and numerical concavity checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .effective_capacity import relaxed_term_ec, term_ec
from .power_model import SystemParams
from .special_functions import DomainError, scaled_and_log_slope

ORACLE_CAP = 4096
_P_FLOOR = 1e-9  # watts, lower end of the power search
_JOINT_GRID_LIMIT = 2 * 10**6


class OracleSizeError(DomainError):
    """The assignment space is too large to enumerate."""


@dataclass
class OracleResult:
    best_assignment: np.ndarray
    best_power: np.ndarray
    best_eee: float
    evaluations: int


def _log_grid(lo, hi, levels):
    return np.exp(np.linspace(math.log(lo), math.log(hi), levels))


def _user_ec_grid(thetas_cols, grids, params):
    """EC of each assigned column at each of its grid powers, shape (d, L)."""
    return np.vstack([term_ec(t, g, params) for t, g in zip(thetas_cols, grids)])


def _best_on_grids(owners, thetas, grids, params):
    """Best EEE over the joint product of per-column power grids.

    Column values are separable, so the joint grid is evaluated by
    broadcasting sums of 1-D tables. Returns (eee, powers) or (-inf, None).
    """
    d, levels = grids.shape
    ec = _user_ec_grid(thetas[owners], grids, params)
    shape_of = [tuple(levels if i == j else 1 for i in range(d)) for j in range(d)]
    total_ec = sum(ec[j].reshape(shape_of[j]) for j in range(d))
    total_p = sum(grids[j].reshape(shape_of[j]) for j in range(d))
    ok = total_p <= params.p_max
    for k in np.unique(owners):
        cols = np.flatnonzero(owners == k)
        user = sum(ec[j].reshape(shape_of[j]) for j in cols)
        ok = ok & (user >= params.c_min)
    value = np.where(ok, total_ec / (params.t_f * (params.rho * total_p + params.p_c)), -np.inf)
    idx = np.unravel_index(int(np.argmax(value)), value.shape)
    best = float(value[idx])
    if not math.isfinite(best):
        return -math.inf, None
    return best, np.array([grids[j][idx[j]] for j in range(d)])


def _coordinate_search(owners, thetas, start, lo, hi, levels, params):
    """Cyclic coordinate ascent on per-column log grids, used for many columns."""
    p = start.copy()

    def value(pv):
        ec = np.array([float(term_ec(thetas[k], pv[j], params)) for j, k in enumerate(owners)])
        for k in np.unique(owners):
            if ec[owners == k].sum() < params.c_min:
                return -math.inf
        if pv.sum() > params.p_max:
            return -math.inf
        return ec.sum() / (params.t_f * (params.rho * pv.sum() + params.p_c))

    best = value(p)
    for _ in range(50):
        moved = False
        for j in range(p.size):
            cand = _log_grid(lo[j], hi[j], levels)
            for c in cand:
                trial = p.copy()
                trial[j] = c
                v = value(trial)
                if v > best:
                    best, p, moved = v, trial, True
        if not moved:
            break
    return best, p


def exhaustive_search(thetas, params: SystemParams, grid_levels: int = 32,
                      refine_rounds: int = 3) -> OracleResult:
    """Enumerate every assignment (idle included) and grid-search the powers.

    Powers run over a log grid on ``[1e-9, P_max]`` per assigned column; each
    refinement round re-centres on the incumbent with a span ten times
    narrower.
    """
    thetas = np.asarray(thetas, dtype=float)
    k_users, n_sub = params.n_users, params.n_subcarriers
    if k_users**n_sub > ORACLE_CAP:
        raise OracleSizeError(f"K^N = {k_users}^{n_sub} exceeds the cap of {ORACLE_CAP}")
    best = (-math.inf, None, None)
    evaluations = 0
    p_lo, p_hi = _P_FLOOR, params.p_max
    span0 = math.log(p_hi / p_lo)
    for choice in itertools.product(range(-1, k_users), repeat=n_sub):
        choice = np.asarray(choice)
        cols = np.flatnonzero(choice >= 0)
        owners = choice[cols]
        if cols.size == 0 or np.unique(owners).size < k_users:
            continue  # a user with no subcarrier cannot reach c_min > 0
        d = cols.size
        joint = grid_levels**d <= _JOINT_GRID_LIMIT
        lo = np.full(d, p_lo)
        hi = np.full(d, p_hi)
        incumbent = None
        value = -math.inf
        for r in range(refine_rounds + 1):
            if r > 0:
                if incumbent is None:
                    break
                half = 0.5 * span0 / 10**r
                lo = np.maximum(incumbent * math.exp(-half), p_lo)
                hi = np.minimum(incumbent * math.exp(half), p_hi)
            grids = np.vstack([_log_grid(a, b, grid_levels) for a, b in zip(lo, hi)])
            if joint:
                v, p = _best_on_grids(owners, thetas, grids, params)
                evaluations += grid_levels**d
            else:
                start = incumbent if incumbent is not None else np.full(d, params.p_max / d)
                v, p = _coordinate_search(owners, thetas, start, lo, hi, grid_levels, params)
                evaluations += grid_levels * d
            if v > value:
                value, incumbent = v, p
        if value > best[0]:
            phi = np.zeros((k_users, n_sub))
            power = np.zeros((k_users, n_sub))
            phi[owners, cols] = 1.0
            power[owners, cols] = incumbent
            best = (value, phi, power)
    if best[1] is None:
        raise DomainError("no feasible assignment on the search lattice")
    return OracleResult(best[1], best[2], best[0], evaluations)


def grid_scan_eee(theta: float, params: SystemParams, points: int = 10**5, p_lo: float = 1e-9):
    """Single user on a single subcarrier: EEE on a log grid over [p_lo, P_max]."""
    p = _log_grid(p_lo, params.p_max, points)
    c = term_ec(theta, p, params)
    value = c / (params.t_f * (params.rho * p + params.p_c))
    value = np.where(c >= params.c_min, value, -np.inf)
    i = int(np.argmax(value))
    return float(p[i]), float(value[i])


def _neg_log_i(p, noise, a):
    x = noise / p
    return scaled_and_log_slope(np.broadcast_to(a, x.shape).astype(float), x)[2]


def second_derivative(p, noise, a, phi=1.0, rel_step=1e-4):
    """Central second difference in p of ``phi * (-ln I)`` (theta = 1 scaling)."""
    p = np.asarray(p, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), p.shape)
    a = np.broadcast_to(np.asarray(a, dtype=float), p.shape)
    h = rel_step * p
    f0 = _neg_log_i(p, noise, a)
    fp = _neg_log_i(p + h, noise, a)
    fm = _neg_log_i(p - h, noise, a)
    return phi * (fp - 2.0 * f0 + fm) / h**2


def hessian_region_check(p_grid, noise_grid, a_grid, tol: float = 1e-8) -> float:
    """Fraction of grid points where the EC is concave in p (c_pp <= tol).

    The grids are combined as an outer product. ``noise_grid`` holds N0 B in
    watts and ``a_grid`` the order A. The sign of c_pp does not depend on
    theta, so the EC is evaluated with theta = 1.
    """
    p, noise, a = np.meshgrid(np.asarray(p_grid, float), np.asarray(noise_grid, float),
                              np.asarray(a_grid, float), indexing="ij")
    if np.any(p <= 0) or np.any(noise <= 0) or np.any(a <= 0):
        raise DomainError("grids must be positive")
    cpp = second_derivative(p.ravel(), noise.ravel(), a.ravel())
    return float(np.mean(cpp <= tol))


def _random_relaxed_point(rng, k_users, n_sub, params):
    phi = rng.random((k_users, n_sub))
    phi /= np.maximum(phi.sum(axis=0, keepdims=True), 1.0)
    # radiated power log-uniform per entry, then scaled into the budget
    p_bar = phi * np.exp(rng.uniform(math.log(1e-7), math.log(params.p_max), (k_users, n_sub)))
    total = p_bar.sum()
    if total > params.p_max:
        p_bar *= params.p_max / total
    return phi, p_bar


def relaxed_ec(thetas, phi, p_bar, params: SystemParams) -> float:
    """System EC in the relaxed variables (phi, p_bar = phi p)."""
    return float(sum(relaxed_term_ec(t, phi[k], p_bar[k], params).sum()
                     for k, t in enumerate(thetas)))


def concavity_gap(thetas, a, b, params: SystemParams, t: float = 0.5) -> float:
    """``(1-t) EC(a) + t EC(b) - EC((1-t) a + t b)``; non-positive when concave."""
    mix_phi = (1 - t) * a[0] + t * b[0]
    mix_p = (1 - t) * a[1] + t * b[1]
    return ((1 - t) * relaxed_ec(thetas, *a, params) + t * relaxed_ec(thetas, *b, params)
            - relaxed_ec(thetas, mix_phi, mix_p, params))


def relaxed_concavity_check(samples: int, seed: int, thetas=None, params: SystemParams = None,
                            t: float = 0.5) -> float:
    """Largest midpoint violation of concavity over random relaxed pairs.

    Defaults to the two-user, three-subcarrier system with theta = (0.1, 0.25).
    """
    if samples < 100:
        raise DomainError("need at least 100 samples")
    if params is None:
        params = SystemParams(2, 3, 1e5, p_max=1.0, p_c=0.1)
    thetas = np.asarray([0.1, 0.25] if thetas is None else thetas, dtype=float)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        a = _random_relaxed_point(rng, params.n_users, params.n_subcarriers, params)
        b = _random_relaxed_point(rng, params.n_users, params.n_subcarriers, params)
        worst = max(worst, concavity_gap(thetas, a, b, params, t))
    return worst
