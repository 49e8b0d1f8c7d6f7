"""Effective capacity of Rayleigh-faded OFDMA links.

For one (user, subcarrier) term with bandwidth ``b`` and power ``p`` the
per-frame service is ``r = T_f b log2(1 + g p / (N0 b))`` with ``g ~ Exp(1)``.
Its moment ``I = E[exp(-theta r)]`` has the closed form

    I = x exp(x) E_A(x),   x = N0 b / p,   A = theta T_f b / ln 2,

and the effective capacity contributes ``-ln(I) / theta`` bits per frame.
"""

from __future__ import annotations

import math

import numpy as np

from .channel_qos import sample_channel_gains
from .power_model import SystemParams
from .special_functions import DomainError, exp_integral_scaled, scaled_and_log_slope

LN2 = math.log(2.0)

# Below this QoS exponent the ergodic-rate limit is used instead of -ln(I)/theta.
THETA_ERGODIC = 1e-8


def order_a(theta, b, params: SystemParams):
    """A = theta T_f b / ln 2 (dimensionless)."""
    return np.asarray(theta, dtype=float) * params.t_f * np.asarray(b, dtype=float) / LN2


def ec_integrand_expectation(theta: float, p: float, b: float, params: SystemParams) -> float:
    """Closed-form ``E[exp(-theta r)]`` for one term; lies in (0, 1]."""
    if not (theta > 0 and p > 0 and b > 0):
        raise DomainError("theta, p and b must all be positive")
    x = params.n0 * b / p
    return x * exp_integral_scaled(float(order_a(theta, b, params)), x)


def ergodic_rate(p, b, params: SystemParams):
    """Mean service ``E[r]`` in bits per frame; ``E[ln(1 + g/x)] = exp(x) E_1(x)``."""
    p = np.asarray(p, dtype=float)
    b = np.broadcast_to(np.asarray(b, dtype=float), p.shape)
    out = np.zeros(p.shape)
    on = p > 0
    if on.any():
        x = params.n0 * b[on] / p[on]
        out[on] = params.t_f * b[on] / LN2 * exp_integral_scaled(1.0, x)
    return out


def term_ec(theta: float, p, params: SystemParams, b=None):
    """Per-term effective capacity ``-ln(I)/theta`` for an array of powers.

    ``b`` defaults to the subcarrier bandwidth. Zero power gives zero.
    """
    p = np.asarray(p, dtype=float)
    b = params.subcarrier_bandwidth if b is None else b
    b = np.broadcast_to(np.asarray(b, dtype=float), p.shape)
    if theta < THETA_ERGODIC:
        return ergodic_rate(p, b, params)
    out = np.zeros(p.shape)
    on = p > 0
    if on.any():
        x = params.n0 * b[on] / p[on]
        a = order_a(theta, b[on], params)
        _, _, neg_log = scaled_and_log_slope(a, x)
        out[on] = neg_log / theta
    return out


def term_ec_and_slope(theta: float, p, params: SystemParams):
    """Per-term EC and its power derivative on a full subcarrier (p > 0)."""
    p = np.asarray(p, dtype=float)
    b = params.subcarrier_bandwidth
    x = params.n0 * b / p
    a = np.full(p.shape, float(order_a(theta, b, params)))
    _, g, neg_log = scaled_and_log_slope(a, x)
    return neg_log / theta, g / (theta * p)


def zero_power_slope(params: SystemParams) -> float:
    """Limit of d(EC)/dp as p -> 0+, ``T_f / (N0 ln 2)``; independent of theta."""
    return params.t_f / (params.n0 * LN2)


def _check_row(phi_row, p_row):
    phi_row = np.asarray(phi_row, dtype=float)
    p_row = np.asarray(p_row, dtype=float)
    if phi_row.shape != p_row.shape:
        raise DomainError("phi_row and p_row must have the same shape")
    if np.any(phi_row < 0) or np.any(phi_row > 1):
        raise DomainError("phi entries must lie in [0, 1]")
    if np.any(p_row < 0):
        raise DomainError("powers must be non-negative")
    if np.any((phi_row > 0) & (p_row == 0)):
        raise DomainError("assigned subcarrier with zero power")
    return phi_row, p_row


def user_ec(theta_k: float, phi_row, p_row, params: SystemParams, relaxed: bool = False) -> float:
    """Effective capacity of one user in bits per frame.

    Binary mode sums ``phi * c(p)`` on full subcarriers. Relaxed mode treats
    ``phi`` as a time-sharing fraction: the SNR argument is formed from the
    shared bandwidth ``phi B`` and the radiated power ``phi p`` while the
    order ``A`` keeps the full subcarrier bandwidth. The two modes agree in
    value; relaxed mode exists so callers can work in ``(phi, phi p)``.
    """
    if not (theta_k > 0 and math.isfinite(theta_k)):
        raise DomainError("theta must be positive and finite")
    phi_row, p_row = _check_row(phi_row, p_row)
    on = phi_row > 0
    if not on.any():
        return 0.0
    phi = phi_row[on]
    if relaxed:
        return float(np.sum(relaxed_term_ec(theta_k, phi, phi * p_row[on], params)))
    c = term_ec(theta_k, p_row[on], params)
    return float(np.sum(phi * c))


def total_ec(thetas, phi, p, params: SystemParams, relaxed: bool = False) -> float:
    """System effective capacity, the sum of :func:`user_ec` over users."""
    thetas = np.asarray(thetas, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float)
    p = np.asarray(p, dtype=float)
    if phi.ndim != 2 or phi.shape != p.shape or phi.shape[0] != thetas.size:
        raise DomainError("phi and p must be K x N with K matching the theta vector")
    return float(
        sum(user_ec(t, phi[k], p[k], params, relaxed=relaxed) for k, t in enumerate(thetas))
    )


def relaxed_term_ec(theta: float, phi, p_bar, params: SystemParams):
    """Relaxed EC ``-(phi/theta) ln I`` with ``x = N0 phi B / p_bar``.

    This is the perspective ``phi * c(p_bar / phi)`` of the per-term EC.
    Vectorized; points with ``phi == 0`` contribute zero.
    """
    phi = np.asarray(phi, dtype=float)
    p_bar = np.broadcast_to(np.asarray(p_bar, dtype=float), phi.shape)
    out = np.zeros(phi.shape)
    on = (phi > 0) & (p_bar > 0)
    if on.any():
        b = params.subcarrier_bandwidth
        if theta < THETA_ERGODIC:
            out[on] = phi[on] * ergodic_rate(p_bar[on] / phi[on], b, params)
            return out
        x = params.n0 * phi[on] * b / p_bar[on]
        a = np.full(x.shape, float(order_a(theta, b, params)))
        _, _, neg_log = scaled_and_log_slope(a, x)
        out[on] = phi[on] * neg_log / theta
    return out


def _log_mean_exp(log_w):
    """log(mean(exp(log_w))) and the relative standard error of that mean."""
    top = np.max(log_w)
    w = np.exp(log_w - top)
    mean = w.mean()
    rel_se = w.std(ddof=1) / (mean * math.sqrt(w.size))
    return top + math.log(mean), rel_se


def _mc_term(rng, theta, p, b, params, samples, importance):
    """log of the sample estimate of E[exp(-theta r)] and its relative SE."""
    x = params.n0 * b / p
    a = float(order_a(theta, b, params))
    if not importance:
        g = rng.standard_exponential(samples)
        r = params.t_f * b * np.log2(1.0 + g * p / (params.n0 * b))
        return _log_mean_exp(-theta * r)
    # Defensive mixture: half from the channel law, half from a Lomax law
    # whose tail (1 + g/x)^-(alpha+1) follows the integrand's decay.
    alpha = max(a - 1.0, 0.5)
    u = rng.random(samples)
    pick = rng.random(samples) < 0.5
    g = np.where(
        pick,
        -np.log1p(-u),
        x * np.expm1(-np.log1p(-u) / alpha),
    )
    r = params.t_f * b * np.log2(1.0 + g * p / (params.n0 * b))
    log_q = np.logaddexp(
        math.log(0.5) - g,
        math.log(0.5) + math.log(alpha / x) - (alpha + 1.0) * np.log1p(g / x),
    )
    return _log_mean_exp(-theta * r - g - log_q)


def mc_effective_capacity(
    theta: float,
    phi_row,
    p_row,
    params: SystemParams,
    samples: int = 10**6,
    seed: int = 0,
    importance: bool = True,
):
    """Monte-Carlo estimate of a user's EC from the rate definition.

    Returns ``(estimate, standard_error)`` in bits per frame. Each assigned
    subcarrier gets its own draws from one seeded generator; the standard
    error follows from the delta method on ``-ln(mean)/theta``.

    With ``importance=False`` gains are drawn from the channel law directly.
    That estimator is exact in expectation but, when the rate dominates
    ``1/theta`` (large ``A``), almost all of its mass comes from rare deep
    fades and its error bars are unreliable. The default draws from a
    defensive mixture of the channel law and a heavy-tailed proposal and
    reweights, which keeps the estimate unbiased with a usable variance.
    """
    if samples < 10**4:
        raise DomainError("need at least 1e4 samples")
    if not (theta > 0 and math.isfinite(theta)):
        raise DomainError("theta must be positive and finite")
    phi_row, p_row = _check_row(phi_row, p_row)
    on = phi_row > 0
    if not on.any():
        raise DomainError("no assigned subcarrier with positive power")
    rng = np.random.default_rng(seed)
    b = params.subcarrier_bandwidth
    estimate = 0.0
    var = 0.0
    for phi, p in zip(phi_row[on], p_row[on]):
        log_i, rel_se = _mc_term(rng, theta, p, b, params, samples, importance)
        estimate += -phi * log_i / theta
        var += (phi * rel_se / theta) ** 2
    return estimate, math.sqrt(var)


def mc_ergodic_rate(p: float, params: SystemParams, samples: int = 10**6, seed: int = 0):
    """Monte-Carlo mean rate on one full subcarrier, with standard error."""
    g = sample_channel_gains(1, samples, seed).ravel()
    b = params.subcarrier_bandwidth
    r = params.t_f * b * np.log2(1.0 + g * p / (params.n0 * b))
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(samples))
