"""Dinkelbach iteration for the effective-energy-efficiency ratio."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .effective_capacity import total_ec
from .inner_solver import DualState, InnerConfig, solve_parametric
from .power_model import Allocation, SystemParams, energy_per_frame
from .special_functions import DomainError


class MaxIterationsError(RuntimeError):
    """Outer loop hit its iteration cap; ``report`` holds the trace so far."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class SolverConfig:
    max_outer: int = 100
    eps_dinkelbach: float = 1e-6
    q0: float = 0.0
    inner: InnerConfig = field(default_factory=InnerConfig)
    parallelism: int = 1


@dataclass
class SolveReport:
    q_trace: list = field(default_factory=list)
    f_trace: list = field(default_factory=list)
    power_trace: list = field(default_factory=list)
    eee_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    nu_trace: list = field(default_factory=list)
    inner_iterations_per_outer: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)
    eee_final: float = float("nan")
    ec_per_user: Optional[np.ndarray] = None
    allocation: Optional[Allocation] = None
    outer_iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    thetas: Optional[np.ndarray] = None

    @property
    def user_power(self) -> np.ndarray:
        """Total transmit power per user in watts."""
        return self.allocation.radiated.sum(axis=1)


def dinkelbach_solve(thetas, params: SystemParams, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Maximize EC / energy by solving ``F(q) = max C - q U`` until ``|F(q)| <= eps``.

    Each outer iteration is one parametric solve; the next ``q`` is the
    efficiency of the allocation that solve returned. Multipliers carry over
    between outer iterations.
    """
    cfg = cfg or SolverConfig()
    thetas = np.asarray(thetas, dtype=float)
    if params.beta != 0.0:
        raise DomainError("the rate-dependent circuit term (beta > 0) is not supported")
    if cfg.q0 < 0:
        raise DomainError("q0 must be non-negative")
    start = time.perf_counter()
    report = SolveReport(thetas=thetas.copy())
    q = cfg.q0
    dual: Optional[DualState] = None
    for i in range(cfg.max_outer):
        res = solve_parametric(q, thetas, params, dual, cfg.inner)
        dual = res.dual
        alloc = res.allocation
        ec = float(res.ec_per_user.sum())
        efficiency = ec / energy_per_frame(alloc, params)
        report.q_trace.append(q)
        report.f_trace.append(res.f_value)
        report.power_trace.append(alloc.transmit_power)
        report.eee_trace.append(efficiency)
        report.lambda_trace.append(res.kkt_lambda)
        report.nu_trace.append(res.kkt_nu.copy())
        report.inner_iterations_per_outer.append(res.inner_iterations)
        report.dual_history.extend(res.dual_history)
        report.allocation = alloc
        report.ec_per_user = res.ec_per_user.copy()
        report.eee_final = efficiency
        report.outer_iterations = i + 1
        if abs(res.f_value) <= cfg.eps_dinkelbach:
            report.converged = True
            break
        q = efficiency
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        raise MaxIterationsError(
            f"|F(q)| = {abs(report.f_trace[-1]):.3g} after {cfg.max_outer} outer iterations",
            report,
        )
    return report


SWEEP_PARAMS = ("p_c", "rho")


def _with_value(thetas, params: SystemParams, name: str, value: float):
    if name.startswith("theta:"):
        k = int(name.split(":", 1)[1])
        if not 0 <= k < thetas.size:
            raise DomainError(f"user index {k} out of range")
        thetas = thetas.copy()
        thetas[k] = value
        return thetas, params
    if name in SWEEP_PARAMS:
        return thetas, replace(params, **{name: value})
    raise DomainError(f"unknown sweep parameter {name!r}")


def _sweep_point(args):
    thetas, params, name, value, cfg = args
    try:
        thetas, params = _with_value(thetas, params, name, value)
        rep = dinkelbach_solve(thetas, params, cfg)
        return rep.user_power, rep.eee_final, rep.outer_iterations, None
    except Exception as exc:  # recorded per point, sweep continues
        k = params.n_users
        return np.full(k, math.nan), math.nan, 0, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepRow:
    value: float
    user_power: np.ndarray
    eee: float
    outer_iterations: int
    error: Optional[str] = None


def sweep(parameter: str, grid, thetas, params: SystemParams, cfg: Optional[SolverConfig] = None):
    """One full solve per grid value of ``theta:k``, ``p_c`` or ``rho``.

    ``theta:k`` uses a zero-based user index. Returns a list of
    :class:`SweepRow`; failures are recorded on the row.
    """
    cfg = cfg or SolverConfig()
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise DomainError("sweep grid must be sorted ascending")
    thetas = np.asarray(thetas, dtype=float)
    _with_value(thetas, params, parameter, params.rho)  # reject bad names up front
    jobs = [(thetas, params, parameter, float(v), cfg) for v in grid]
    if cfg.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    return [SweepRow(float(v), *r) for v, r in zip(grid, results)]


def map_solves(jobs, cfg: SolverConfig):
    """Run ``dinkelbach_solve`` over ``(thetas, params)`` pairs, maybe in parallel."""
    args = [(t, p, cfg) for t, p in jobs]
    if cfg.parallelism > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            return list(pool.map(_solve_or_error, args))
    return [_solve_or_error(a) for a in args]


def _solve_or_error(args):
    thetas, params, cfg = args
    try:
        return dinkelbach_solve(thetas, params, cfg)
    except Exception as exc:
        return exc
