"""Generalized exponential integral of real order, in scaled form.

All routines return ``S(nu, x) = exp(x) * E_nu(x)`` where

    E_nu(x) = integral_1^inf exp(-x t) t**(-nu) dt.

Working in scaled form keeps the values finite for the very large arguments
``x = N0 * B / p`` produced by small transmit powers.

Two evaluation paths are used:

* ``x >= 1``: modified Lentz evaluation of the classical continued fraction.
* ``x < 1``: the ascending series, with the pole pair that appears near
  integer orders folded into a single cancellation-free term.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

__all__ = [
    "DomainError",
    "exp_integral_scaled",
    "exp_integral_scaled_ratio",
    "exp_integral_quadrature_oracle",
    "scaled_and_log_slope",
]

_EULER_GAMMA = 0.57721566490153286061
_CF_SWITCH = 1.0
_CF_MAX_ITER = 20000
_CF_EPS = 3e-16  # one ulp either side of 1
_SERIES_TERMS = 33  # k = 0 .. 32; x**k / k! < 4e-36 for x < 1

# zeta(k) / k for k = 2..65, coefficients of log Gamma(1 - e) / e - gamma.
_ZETA_COEFFS = np.array([special.zeta(k, 1) / k for k in range(2, 66)])


class DomainError(ValueError):
    """Raised when an argument lies outside the supported domain."""


class ConvergenceError(ArithmeticError):
    """Raised when an iterative evaluation does not converge."""


def _as_pair(nu, x):
    nu_arr, x_arr = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(x, dtype=float)
    )
    return nu_arr, x_arr


def _validate(nu, x, min_order, inclusive):
    if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(x))):
        raise DomainError("order and argument must be finite")
    if np.any(x <= 0.0):
        raise DomainError("argument x must be > 0")
    bad = nu < min_order if inclusive else nu <= min_order
    if np.any(bad):
        raise DomainError(f"order out of range (got {np.min(nu)!r})")


def _lentz_tail(nu, x):
    """Return T with 1/S = x + nu - nu*T, evaluated by modified Lentz.

    T = 1/(b1 + a2/(b2 + a3/(b3 + ...))), b_i = x + nu + 2i,
    a_i = -i (nu - 1 + i).
    """
    tiny = 1e-300
    f = x + nu + 2.0
    c = f.copy()
    d = np.zeros_like(f)
    active = np.ones(f.shape, dtype=bool)
    for i in range(2, _CF_MAX_ITER):
        a = -i * (nu - 1.0 + i)
        b = x + nu + 2.0 * i
        d_new = b + a * d
        d_new = np.where(np.abs(d_new) < tiny, tiny, d_new)
        c_new = b + a / c
        c_new = np.where(np.abs(c_new) < tiny, tiny, c_new)
        d_new = 1.0 / d_new
        delta = c_new * d_new
        f = np.where(active, f * delta, f)
        c = np.where(active, c_new, c)
        d = np.where(active, d_new, d)
        active &= np.abs(delta - 1.0) > _CF_EPS
        if not active.any():
            return 1.0 / f
    raise ConvergenceError("continued fraction for E_nu(x) did not converge")


def _log_gamma_one_minus_over(eps):
    """(log Gamma(1 - eps)) / eps, regular at eps = 0, |eps| <= 0.5."""
    # Coefficients tend to 1/k, so stop once |eps|**k is far below 1e-17.
    e_max = float(np.max(np.abs(eps), initial=0.0))
    degree = _ZETA_COEFFS.size
    if e_max < 0.5:
        degree = min(degree, int(math.ceil(-40.0 / math.log(max(e_max, 1e-300)))) + 1)
    powers = eps[:, None] ** np.arange(1, degree + 1)
    return _EULER_GAMMA + powers @ _ZETA_COEFFS[:degree]


def _log1p_over(z):
    """log1p(z) / z with the removable point z = 0 filled in."""
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2.0, np.log1p(safe) / safe)


_K = np.arange(_SERIES_TERMS, dtype=float)
_LOG_FACT = special.gammaln(_K + 1.0)


def _scaled_series(nu, x):
    """exp(x) E_nu(x) for 0 < x < 1 and real nu > -1."""
    n = np.rint(nu).astype(np.int64)
    eps = nu - n
    log_x = np.log(x)

    # Regular part -sum (-x)^k / (k! (k + 1 - nu)), skipping the pole at k = n - 1.
    terms = np.exp(log_x[:, None] * _K - _LOG_FACT) * np.where(_K % 2 == 0, 1.0, -1.0)
    skip = _K[None, :] == (n - 1)[:, None]
    denom = np.where(skip, 1.0, _K[None, :] + 1.0 - nu[:, None])
    value = -np.sum(np.where(skip, 0.0, terms / denom), axis=1)

    # Gamma(1 - nu) x**(nu - 1) for orders away from the poles at 1, 2, ...
    low = n <= 0
    if low.any():
        gam = special.gamma(1.0 - nu[low]) * np.exp((nu[low] - 1.0) * log_x[low])
        value[low] += gam

    # Pole pair at k = n - 1 merged analytically.
    paired = (n >= 1) & (n <= _SERIES_TERMS)
    if paired.any():
        e = eps[paired]
        m = n[paired]
        lx = log_x[paired]
        m_over_e = _log_gamma_one_minus_over(e) + lx
        top = int(m.max())
        if top > 1:
            i = np.arange(1, top, dtype=float)
            harm = _log1p_over(e[:, None] / i) / i
            m_over_e = m_over_e - np.sum(np.where(i[None, :] <= (m - 1)[:, None], harm, 0.0), axis=1)
        big_m = m_over_e * e
        core = -m_over_e * special.exprel(big_m)
        log_pref = (m - 1) * lx - special.gammaln(m.astype(float))
        sign = np.where((m - 1) % 2 == 0, 1.0, -1.0)
        value[paired] += sign * np.exp(log_pref) * core
    return np.exp(x) * value


def _scaled_unchecked(nu, x):
    out = np.empty_like(x)
    cf = x >= _CF_SWITCH
    if cf.any():
        t = _lentz_tail(nu[cf], x[cf])
        out[cf] = 1.0 / (x[cf] + nu[cf] * (1.0 - t))
    ser = ~cf
    if ser.any():
        out[ser] = _scaled_series(nu[ser], x[ser])
    return out


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value.reshape(()))
    return value


def exp_integral_scaled(nu, x):
    """Return ``exp(x) * E_nu(x)`` for real ``nu >= 0`` and ``x > 0``.

    Order zero uses the closed form ``1/x``. Accepts scalars or arrays
    (broadcast together); returns a float for scalar input.
    """
    nu_arr, x_arr = _as_pair(nu, x)
    _validate(nu_arr, x_arr, 0.0, inclusive=True)
    nu_f = np.atleast_1d(nu_arr).astype(float).ravel()
    x_f = np.atleast_1d(x_arr).astype(float).ravel()
    out = np.empty_like(x_f)
    zero = nu_f == 0.0
    out[zero] = 1.0 / x_f[zero]
    rest = ~zero
    if rest.any():
        out[rest] = _scaled_unchecked(nu_f[rest], x_f[rest])
    return _scalar_or_array(out.reshape(nu_arr.shape), nu_arr)


def exp_integral_scaled_ratio(nu, x):
    """Return ``E_{nu-1}(x) / E_nu(x)`` for ``nu > 1``, ``x > 0``."""
    nu_arr, x_arr = _as_pair(nu, x)
    _validate(nu_arr, x_arr, 1.0, inclusive=False)
    nu_f = np.atleast_1d(nu_arr).astype(float).ravel()
    x_f = np.atleast_1d(x_arr).astype(float).ravel()
    lower = nu_f - 1.0
    num = np.where(lower == 0.0, 1.0 / x_f, 0.0)
    nz = lower != 0.0
    if nz.any():
        num[nz] = _scaled_unchecked(lower[nz], x_f[nz])
    ratio = num / _scaled_unchecked(nu_f, x_f)
    return _scalar_or_array(ratio.reshape(nu_arr.shape), nu_arr)


def scaled_and_log_slope(nu, x):
    """Return ``(S, G, L)`` for array orders ``nu > 0`` and arguments ``x > 0``.

    ``S = exp(x) E_nu(x)``, ``L = -log(x S)`` and ``G = nu + x - 1/S``, which
    equals ``x d/dx log(x S) = -x dL/dx``. ``G`` lies in ``[0, max(1, nu))`` and is the
    factor the power derivative of the effective capacity needs.

    Both ``G`` and ``L`` avoid the cancellation of their defining
    expressions: for ``x >= 1`` they come from the continued-fraction tail
    (``L = log1p(nu (1 - T) / x)``), below that from the series values via
    ``G = 1 + x - x E_{nu-1}/E_nu``. No argument validation.
    """
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    s = np.empty_like(x)
    g = np.empty_like(x)
    neg_log = np.empty_like(x)
    cf = x >= _CF_SWITCH
    if cf.any():
        nu_c, x_c = nu[cf], x[cf]
        t = _lentz_tail(nu_c, x_c)
        excess = nu_c * (1.0 - t)
        s[cf] = 1.0 / (x_c + excess)
        g[cf] = nu_c * t
        neg_log[cf] = np.log1p(excess / x_c)
    ser = ~cf
    if ser.any():
        nu_s, x_s = nu[ser], x[ser]
        both = _scaled_series(np.concatenate([nu_s, nu_s - 1.0]), np.concatenate([x_s, x_s]))
        s_nu, s_lower = both[: nu_s.size], both[nu_s.size :]
        s[ser] = s_nu
        g[ser] = 1.0 + x_s - x_s * s_lower / s_nu
        neg_log[ser] = -(np.log(x_s) + np.log(s_nu))
    return s, g, neg_log


def exp_integral_quadrature_oracle(nu: float, x: float, tol: float = 1e-10) -> float:
    """Independent adaptive-quadrature value of ``exp(x) * E_nu(x)``.

    Integrates ``exp(-x s) (1 + s)**(-nu)`` over ``s >= 0`` piecewise on a
    geometric set of breakpoints that resolves both the ``1/x`` and the unit
    length scale. Intended for tests only.
    """
    if not (1e-13 <= tol <= 1e-6):
        raise DomainError("tol must lie in [1e-13, 1e-6]")
    if not (math.isfinite(nu) and math.isfinite(x)) or nu < 0.0 or x <= 0.0:
        raise DomainError("need nu >= 0 and x > 0")

    def integrand(s):
        return math.exp(-x * s - nu * math.log1p(s))

    scale = 1.0 / x
    s_max = 80.0 * scale
    points = {0.0, s_max}
    for j in range(-4, 3):
        points.add(scale * 10.0**j)
    for j in range(-4, int(math.ceil(math.log10(s_max))) + 1):
        points.add(10.0**j)
    edges = sorted(p for p in points if p <= s_max)

    total = 0.0
    err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    integrand, lo, hi, epsabs=0.0, epsrel=tol / 10.0, limit=400
                )
            except integrate.IntegrationWarning as exc:
                raise ConvergenceError(
                    f"quadrature failed on [{lo:g}, {hi:g}]: {exc}"
                ) from exc
        total += val
        err_total += err
    # Tail beyond s_max is bounded by exp(-80) / x.
    err_total += math.exp(-80.0) * scale
    if err_total > tol * total:
        raise ConvergenceError(
            f"quadrature error estimate {err_total:.3g} exceeds tolerance"
        )
    return total
