"""System constants, allocations, total power consumption and the EEE objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special_functions import DomainError


@dataclass(frozen=True)
class SystemParams:
    """Static downlink OFDMA constants, all in SI units (watts, hertz, seconds).

    ``c_min`` is the per-user minimum effective capacity in bits per frame.
    ``beta`` is the rate-dependent circuit-power coefficient; it is kept for
    completeness but the solver only accepts ``beta == 0``.
    """

    n_users: int
    n_subcarriers: int
    total_bandwidth: float
    t_f: float = 667e-6
    n0: float = 1e-12
    p_max: float = 1.0
    p_c: float = 0.1
    rho: float = 2.5
    beta: float = 0.0
    c_min: float = 1.0

    def __post_init__(self):
        if self.n_users < 1 or self.n_subcarriers < 1:
            raise DomainError("need at least one user and one subcarrier")
        for name in ("total_bandwidth", "t_f", "n0", "p_max", "p_c", "c_min"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.rho) and self.rho >= 1.0):
            raise DomainError(f"rho must be >= 1, got {self.rho!r}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise DomainError(f"beta must be >= 0, got {self.beta!r}")

    @property
    def subcarrier_bandwidth(self) -> float:
        return self.total_bandwidth / self.n_subcarriers

    @property
    def noise_power(self) -> float:
        """N0 * B, the per-subcarrier noise power in watts."""
        return self.n0 * self.subcarrier_bandwidth


@dataclass
class Allocation:
    """Power matrix ``p`` (watts) and subcarrier assignment ``phi``, both K x N.

    In binary mode every column of ``phi`` is one-hot or all zero; in relaxed
    mode entries lie in [0, 1] with column sums <= 1 (time sharing). The
    power actually radiated on (k, n) is ``phi * p``.
    """

    p: np.ndarray
    phi: np.ndarray
    mode: str = "binary"

    def __post_init__(self):
        self.p = np.array(self.p, dtype=float)
        self.phi = np.array(self.phi, dtype=float)
        if self.p.shape != self.phi.shape or self.p.ndim != 2:
            raise DomainError("p and phi must be K x N matrices of equal shape")
        if self.mode not in ("binary", "relaxed"):
            raise DomainError(f"unknown allocation mode {self.mode!r}")
        if np.any(self.p < 0) or not np.all(np.isfinite(self.p)):
            raise DomainError("powers must be finite and non-negative")
        if np.any(self.phi < 0) or np.any(self.phi > 1):
            raise DomainError("phi entries must lie in [0, 1]")
        if self.mode == "binary":
            if not np.all((self.phi == 0) | (self.phi == 1)):
                raise DomainError("binary allocation needs phi in {0, 1}")
        if np.any(self.phi.sum(axis=0) > 1 + 1e-12):
            raise DomainError("each subcarrier may carry at most one user in total")

    @property
    def shape(self):
        return self.p.shape

    @property
    def radiated(self) -> np.ndarray:
        return self.phi * self.p

    @property
    def transmit_power(self) -> float:
        return float(self.radiated.sum())

    @property
    def subcarriers_per_user(self) -> np.ndarray:
        """N_k = sum_n phi[k, n]."""
        return self.phi.sum(axis=1)

    def is_within_budget(self, params: SystemParams, tol: float = 1e-9) -> bool:
        return self.transmit_power <= params.p_max + tol

    @classmethod
    def zeros(cls, params: SystemParams) -> "Allocation":
        shape = (params.n_users, params.n_subcarriers)
        return cls(np.zeros(shape), np.zeros(shape))


def total_power(alloc: Allocation, params: SystemParams) -> float:
    """Consumed power ``rho * sum(phi p) + P_c`` in watts (beta = 0 model)."""
    if params.beta != 0.0:
        raise DomainError("the rate-dependent circuit term (beta > 0) is not supported")
    return params.rho * alloc.transmit_power + params.p_c


def energy_per_frame(alloc: Allocation, params: SystemParams) -> float:
    """U_p = T_f * total power, joules per frame."""
    return params.t_f * total_power(alloc, params)


def eee(thetas, alloc: Allocation, params: SystemParams) -> float:
    """Effective energy efficiency in bits per joule."""
    from .effective_capacity import total_ec

    if alloc.transmit_power == 0.0:
        return 0.0
    ec = total_ec(thetas, alloc.phi, alloc.p, params, relaxed=alloc.mode == "relaxed")
    return ec / energy_per_frame(alloc, params)
