"""QoS-exponent bookkeeping, unit conversion and the Rayleigh channel model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .special_functions import DomainError

# Channel-power-gain draws use numpy's PCG64 bit generator through
# ``numpy.random.default_rng(seed)``; streams are stable across numpy >= 1.17.
RNG_NAME = "numpy.random.PCG64"


def theta_from_delay(d_max: float, epsilon: float, delta: float) -> float:
    """Smallest QoS exponent meeting ``Pr[D >= d_max] <= epsilon`` at rate ``delta``.

    Returns ``-ln(epsilon) / (delta * d_max)`` in 1/bits.
    """
    if not (d_max > 0 and math.isfinite(d_max)):
        raise DomainError("d_max must be a positive finite delay in seconds")
    if not (0.0 < epsilon < 1.0):
        raise DomainError("epsilon must lie in (0, 1)")
    if not (delta > 0 and math.isfinite(delta)):
        raise DomainError("delta must be a positive finite rate in bits/s")
    return -math.log(epsilon) / (delta * d_max)


@dataclass(frozen=True)
class UserQos:
    """Per-user QoS exponent, optionally derived from a delay target."""

    theta: float
    d_max: Optional[float] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise DomainError(f"theta must be positive and finite, got {self.theta!r}")

    @classmethod
    def from_delay(cls, d_max: float, epsilon: float, delta: float) -> "UserQos":
        return cls(theta_from_delay(d_max, epsilon, delta), d_max, epsilon, delta)

    @property
    def delay_exponent(self) -> Optional[float]:
        """theta * delta = -ln(epsilon)/d_max, when the rate is known."""
        if self.delta is None:
            return None
        return self.theta * self.delta


@dataclass(frozen=True)
class RayleighChannel:
    """Unit-mean exponential channel-power-gain (Rayleigh amplitude)."""

    ell: float = 1.0

    def __post_init__(self):
        if self.ell != 1.0:
            raise DomainError("only the unit-rate exponential gain is supported")

    def pdf(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= 0, self.ell * np.exp(-self.ell * g), 0.0)

    def cdf(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= 0, -np.expm1(-self.ell * g), 0.0)


def dbm_to_watts(p_dbm):
    out = 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(p_w):
    return 10.0 * math.log10(p_w) + 30.0


def sample_channel_gains(k: int, n: int, seed: int) -> np.ndarray:
    """K x N i.i.d. unit-mean exponential gains from a freshly seeded PCG64."""
    if k < 1 or n < 1:
        raise DomainError("need at least one user and one subcarrier")
    rng = np.random.default_rng(seed)
    return rng.standard_exponential((k, n))
