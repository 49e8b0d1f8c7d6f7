"""Scenario files: TOML with explicit unit suffixes on every dimensional key.

Example::

    [system]
    n_users = 2
    n_subcarriers = 3
    total_bandwidth_hz = 1e5
    p_max_dbm = 30          # or p_max_w
    p_c_dbm = 20            # or p_c_w

    [qos]
    theta = [0.1, 0.25]     # or a [qos.distribution] table

    [solver]
    max_outer = 100

Omitted keys take the defaults below.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel_qos import dbm_to_watts
from .dinkelbach import SolverConfig
from .inner_solver import InnerConfig
from .power_model import SystemParams
from .special_functions import DomainError

DEFAULTS = {
    "t_f_s": 667e-6,
    "n0_w_per_hz": 1e-12,
    "p_max_w": 1.0,  # 30 dBm
    "p_c_w": 0.1,  # 20 dBm
    "rho": 2.5,
    "beta_w_per_bit": 0.0,
    "c_min_bits": 1.0,
}

_SYSTEM_KEYS = {
    "n_users", "n_subcarriers", "total_bandwidth_hz", "t_f_s", "n0_w_per_hz",
    "p_max_w", "p_max_dbm", "p_c_w", "p_c_dbm", "rho", "beta_w_per_bit", "c_min_bits",
}
_SOLVER_KEYS = {
    "max_outer", "eps_dinkelbach", "max_inner", "eps_lambda", "eps_nu",
    "step_fraction", "alpha_lambda", "alpha_nu", "parallelism",
}
_DIST_KEYS = {"kind", "low", "high", "seed"}

BUNDLED = ("scenario1", "scenario2", "scenario3", "scenario3_k10", "scenario3_k20", "scenario4")


class ConfigError(ValueError):
    """Unreadable or invalid scenario file."""


@dataclass(frozen=True)
class ThetaDistribution:
    low: float = 0.0
    high: float = 1.0
    seed: int = 0
    kind: str = "uniform"

    def draw(self, n_users: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Uniform draws on (low, high]; the open lower end keeps theta > 0."""
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return self.high - (self.high - self.low) * rng.random(n_users)


@dataclass(frozen=True)
class ScenarioConfig:
    params: SystemParams
    theta: Optional[tuple] = None
    distribution: Optional[ThetaDistribution] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    name: str = ""

    def thetas(self, seed: Optional[int] = None) -> np.ndarray:
        if self.theta is not None:
            return np.array(self.theta, dtype=float)
        dist = self.distribution
        if seed is not None:
            dist = ThetaDistribution(dist.low, dist.high, seed, dist.kind)
        return dist.draw(self.params.n_users)


def _reject_unknown(table: dict, allowed: set, where: str):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(extra)}")


def _number(table, key, where, integer=False):
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be finite")
    return value


def _power(table, base, default):
    w_key, dbm_key = f"{base}_w", f"{base}_dbm"
    if w_key in table and dbm_key in table:
        raise ConfigError(f"system: give only one of {w_key} and {dbm_key}")
    if dbm_key in table:
        return dbm_to_watts(_number(table, dbm_key, "system"))
    if w_key in table:
        return float(_number(table, w_key, "system"))
    return default


def _params(table) -> SystemParams:
    _reject_unknown(table, _SYSTEM_KEYS, "system")
    for key in ("n_users", "n_subcarriers", "total_bandwidth_hz"):
        if key not in table:
            raise ConfigError(f"system.{key} is required")

    def get(key):
        return float(_number(table, key, "system")) if key in table else DEFAULTS[key]

    try:
        return SystemParams(
            n_users=_number(table, "n_users", "system", integer=True),
            n_subcarriers=_number(table, "n_subcarriers", "system", integer=True),
            total_bandwidth=float(_number(table, "total_bandwidth_hz", "system")),
            t_f=get("t_f_s"),
            n0=get("n0_w_per_hz"),
            p_max=_power(table, "p_max", DEFAULTS["p_max_w"]),
            p_c=_power(table, "p_c", DEFAULTS["p_c_w"]),
            rho=get("rho"),
            beta=get("beta_w_per_bit"),
            c_min=get("c_min_bits"),
        )
    except DomainError as exc:
        raise ConfigError(f"system: {exc}") from exc


def _qos(table, n_users):
    _reject_unknown(table, {"theta", "distribution"}, "qos")
    has_list = "theta" in table
    has_dist = "distribution" in table
    if has_list == has_dist:
        raise ConfigError("qos: give exactly one of 'theta' (list) and [qos.distribution]")
    if has_list:
        theta = table["theta"]
        if not isinstance(theta, list) or len(theta) != n_users:
            raise ConfigError(f"qos.theta must be a list of {n_users} numbers")
        values = []
        for t in theta:
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not (t > 0 and math.isfinite(t)):
                raise ConfigError(f"qos.theta entries must be positive numbers, got {t!r}")
            values.append(float(t))
        return tuple(values), None
    dist = table["distribution"]
    if not isinstance(dist, dict):
        raise ConfigError("qos.distribution must be a table")
    _reject_unknown(dist, _DIST_KEYS, "qos.distribution")
    kind = dist.get("kind", "uniform")
    if kind != "uniform":
        raise ConfigError(f"qos.distribution.kind: only 'uniform' is supported, got {kind!r}")
    low = float(_number(dist, "low", "qos.distribution")) if "low" in dist else 0.0
    high = float(_number(dist, "high", "qos.distribution")) if "high" in dist else 1.0
    seed = _number(dist, "seed", "qos.distribution", integer=True) if "seed" in dist else 0
    if not (0.0 <= low < high):
        raise ConfigError("qos.distribution needs 0 <= low < high")
    if seed < 0:
        raise ConfigError("qos.distribution.seed must be non-negative")
    return None, ThetaDistribution(low, high, seed, kind)


def _solver(table) -> SolverConfig:
    _reject_unknown(table, _SOLVER_KEYS, "solver")
    ints = {"max_outer", "max_inner", "parallelism"}
    vals = {}
    for key in table:
        vals[key] = _number(table, key, "solver", integer=key in ints)
        if vals[key] <= 0:
            raise ConfigError(f"solver.{key} must be positive")
    inner = InnerConfig(
        max_inner=vals.get("max_inner", 500),
        eps_lambda=float(vals.get("eps_lambda", 1e-6)),
        eps_nu=float(vals.get("eps_nu", 0.5)),
        step_fraction=float(vals.get("step_fraction", 0.01)),
        alpha_lambda=vals.get("alpha_lambda"),
        alpha_nu=vals.get("alpha_nu"),
    )
    return SolverConfig(
        max_outer=vals.get("max_outer", 100),
        eps_dinkelbach=float(vals.get("eps_dinkelbach", 1e-6)),
        inner=inner,
        parallelism=vals.get("parallelism", 1),
    )


def parse_config(data: dict, name: str = "") -> ScenarioConfig:
    _reject_unknown(data, {"name", "system", "qos", "solver"}, "top level")
    for section in ("system", "qos"):
        if section not in data or not isinstance(data[section], dict):
            raise ConfigError(f"missing [{section}] table")
    params = _params(data["system"])
    theta, dist = _qos(data["qos"], params.n_users)
    solver = _solver(data.get("solver", {}))
    return ScenarioConfig(params, theta, dist, solver, str(data.get("name", name)))


def resolve_path(path) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    if str(path) in BUNDLED:
        return Path(str(resources.files("eee_ofdma") / "scenarios" / f"{path}.toml"))
    raise ConfigError(f"{path}: no such file or bundled scenario")


def load_config(path) -> ScenarioConfig:
    p = resolve_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return parse_config(data, p.stem)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Normalized form in SI units; ``parse_config`` maps it back to ``cfg``."""
    prm = cfg.params
    out = {
        "name": cfg.name,
        "system": {
            "n_users": prm.n_users,
            "n_subcarriers": prm.n_subcarriers,
            "total_bandwidth_hz": prm.total_bandwidth,
            "t_f_s": prm.t_f,
            "n0_w_per_hz": prm.n0,
            "p_max_w": prm.p_max,
            "p_c_w": prm.p_c,
            "rho": prm.rho,
            "beta_w_per_bit": prm.beta,
            "c_min_bits": prm.c_min,
        },
    }
    if cfg.theta is not None:
        out["qos"] = {"theta": list(cfg.theta)}
    else:
        d = cfg.distribution
        out["qos"] = {"distribution": {"kind": d.kind, "low": d.low, "high": d.high, "seed": d.seed}}
    s = cfg.solver
    solver = {
        "max_outer": s.max_outer,
        "eps_dinkelbach": s.eps_dinkelbach,
        "max_inner": s.inner.max_inner,
        "eps_lambda": s.inner.eps_lambda,
        "eps_nu": s.inner.eps_nu,
        "step_fraction": s.inner.step_fraction,
        "parallelism": s.parallelism,
    }
    if s.inner.alpha_lambda is not None:
        solver["alpha_lambda"] = s.inner.alpha_lambda
    if s.inner.alpha_nu is not None:
        solver["alpha_nu"] = s.inner.alpha_nu
    out["solver"] = solver
    return out


def dump_config(cfg: ScenarioConfig, path) -> Path:
    path = Path(path)
    path.write_text(tomli_w.dumps(config_to_dict(cfg)), encoding="utf-8")
    return path
