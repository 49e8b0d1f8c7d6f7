"""Command-line entry point ``eee-ofdma``.

Exit codes: 0 success, 1 solver or validation failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, dump_config, load_config
from .dinkelbach import MaxIterationsError, dinkelbach_solve, map_solves, sweep
from .effective_capacity import mc_effective_capacity, user_ec
from .inner_solver import InfeasibleError
from .oracle import OracleSizeError, exhaustive_search, hessian_region_check, relaxed_concavity_check
from .special_functions import ConvergenceError, DomainError
from .traces import emit_traces, write_csv

log = logging.getLogger("eee_ofdma")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
THREADS_ENV = "EEE_OFDMA_THREADS"


class _Usage(Exception):
    pass


def _parallelism(cfg):
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return cfg
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return replace(cfg, solver=replace(cfg.solver, parallelism=n))


def _load(path):
    return _parallelism(load_config(path))


def cmd_solve(args):
    cfg = _load(args.config)
    seed = args.seed if args.seed is not None else (
        cfg.distribution.seed if cfg.distribution is not None else None)
    thetas = cfg.thetas(args.seed)
    out = Path(args.out)
    try:
        report = dinkelbach_solve(thetas, cfg.params, cfg.solver)
    except MaxIterationsError as exc:
        emit_traces(exc.report, out, seed)
        log.error("%s", exc)
        return EXIT_FAIL
    emit_traces(report, out, seed)
    dump_config(cfg, out / "config.toml")
    print(f"EEE {report.eee_final:.6e} bits/J after {report.outer_iterations} outer iterations "
          f"(|F| = {abs(report.f_trace[-1]):.2e})")
    return EXIT_OK


def cmd_oracle(args):
    cfg = _load(args.config)
    thetas = cfg.thetas()
    try:
        res = exhaustive_search(thetas, cfg.params, args.grid_levels, args.refine_rounds)
    except OracleSizeError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k_users, n_sub = res.best_assignment.shape
    rows = [[k + 1, n + 1, res.best_assignment[k, n], res.best_power[k, n]]
            for k in range(k_users) for n in range(n_sub)]
    write_csv(out / "oracle_allocation.csv", ["k", "n", "phi", "p_w"], rows)
    write_csv(out / "oracle_summary.csv", ["eee_bits_per_joule", "evaluations"],
              [[res.best_eee, res.evaluations]])
    print(f"oracle EEE {res.best_eee:.6e} bits/J over {res.evaluations} lattice points")
    return EXIT_OK


def _sweep_name(param: str, n_users: int) -> str:
    """CLI users are numbered from 1; the library indexes from 0."""
    if param.startswith("theta:"):
        try:
            k = int(param.split(":", 1)[1])
        except ValueError:
            raise _Usage(f"bad sweep parameter {param!r}") from None
        if not 1 <= k <= n_users:
            raise _Usage(f"user {k} out of range 1..{n_users}")
        return f"theta:{k - 1}"
    if param in ("p_c", "rho"):
        return param
    raise _Usage(f"unknown sweep parameter {param!r}")


def cmd_sweep(args):
    cfg = _load(args.config)
    name = _sweep_name(args.param, cfg.params.n_users)
    if args.steps < 1 or args.max < args.min:
        raise _Usage("need --steps >= 1 and --max >= --min")
    grid = np.linspace(args.min, args.max, args.steps)
    rows = sweep(name, grid, cfg.thetas(), cfg.params, cfg.solver)
    k_users = cfg.params.n_users
    header = ["value"] + [f"p_user_{k + 1}_w" for k in range(k_users)] + [
        "eee_bits_per_joule", "outer_iterations", "error"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = [[r.value, *r.user_power, r.eee, r.outer_iterations, r.error or ""] for r in rows]
    write_csv(out / "sweep.csv", header, table)
    failed = sum(r.error is not None for r in rows)
    print(f"{len(rows)} points, {failed} failed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_validate_ec(args):
    cfg = _load(args.config)
    prm = cfg.params
    thetas = cfg.thetas()
    # round-robin assignment at equal power
    phi = np.eye(prm.n_users)[np.arange(prm.n_subcarriers) % prm.n_users].T
    p = phi * prm.p_max / prm.n_subcarriers
    worst = 0.0
    print("user  closed_form_bits  monte_carlo_bits  std_err  z")
    for k, theta in enumerate(thetas):
        if not phi[k].any():
            continue
        exact = user_ec(theta, phi[k], p[k], prm)
        est, se = mc_effective_capacity(theta, phi[k], p[k], prm, args.samples, args.seed + k)
        z = (est - exact) / se
        worst = max(worst, abs(z))
        print(f"{k + 1:4d}  {exact:16.8g}  {est:16.8g}  {se:7.2g}  {z:+.2f}")
    return EXIT_OK if worst <= 3.0 else EXIT_FAIL


def cmd_check_concavity(args):
    params = thetas = None
    if args.config:
        cfg = load_config(args.config)
        params, thetas = cfg.params, cfg.thetas()
    worst = relaxed_concavity_check(args.samples, args.seed, thetas, params)
    frac = hessian_region_check(np.geomspace(1e-9, 1.0, 10), np.geomspace(1e-10, 1e-4, 10),
                                np.geomspace(1e-2, 1e3, 10))
    print(f"max midpoint violation {worst:.3e} (limit 1e-9); c_pp <= 0 on {frac:.3f} of grid")
    return EXIT_OK if worst <= 1e-9 and frac == 1.0 else EXIT_FAIL


def cmd_avg_iterations(args):
    cfg = _load(args.config)
    if cfg.distribution is None:
        raise ConfigError("avg-iterations needs a [qos.distribution] table")
    rng = np.random.default_rng(args.seed)
    draws = [cfg.distribution.draw(cfg.params.n_users, rng) for _ in range(args.realizations)]
    reports = map_solves([(t, cfg.params) for t in draws], cfg.solver)
    iters = []
    rows = []
    for i, (t, rep) in enumerate(zip(draws, reports)):
        if isinstance(rep, Exception):
            rows.append([i, "", "", f"{type(rep).__name__}: {rep}"])
            continue
        iters.append(rep.outer_iterations)
        rows.append([i, rep.outer_iterations, rep.eee_final, ""])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "iterations.csv",
                  ["realization", "outer_iterations", "eee_bits_per_joule", "error"], rows)
    failed = args.realizations - len(iters)
    mean = float(np.mean(iters)) if iters else float("nan")
    print(f"mean outer iterations {mean:.3f} over {len(iters)} realizations "
          f"(seed {args.seed}, {failed} failed)")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="eee-ofdma", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the outer/inner solver and write traces")
    p.add_argument("--config", required=True, help="TOML file or bundled scenario name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="overrides the theta distribution seed")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="exhaustive search on a small scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-levels", type=int, default=32)
    p.add_argument("--refine-rounds", type=int, default=3)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="solve over a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="theta:k (k from 1), p_c (watts) or rho")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-ec", help="closed-form EC against Monte Carlo")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate_ec)

    p = sub.add_parser("check-concavity", help="numerical concavity checks of the relaxed EC")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="defaults to scenario 1")
    p.set_defaults(func=cmd_check_concavity)

    p = sub.add_parser("avg-iterations", help="mean outer iterations over random theta draws")
    p.add_argument("--config", required=True)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_avg_iterations)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, _Usage) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, ConvergenceError, MaxIterationsError, DomainError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
