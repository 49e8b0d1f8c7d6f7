"""CSV output of solve reports, sweeps and oracle results."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def _fmt(value) -> str:
    """Locale-independent text for numbers; shortest round-trip repr for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


CONVERGENCE_HEADER = [
    "outer_iter", "q_bits_per_joule", "f_q", "total_tx_power_w", "eee_bits_per_joule",
    "lambda", "min_nu", "max_nu", "inner_iters",
]


def emit_traces(report, out_dir, theta_seed=None) -> list:
    """Write convergence.csv, allocation.csv and summary.csv into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc
    rows = []
    for i in range(len(report.q_trace)):
        nu = np.asarray(report.nu_trace[i])
        rows.append([
            i + 1, report.q_trace[i], report.f_trace[i], report.power_trace[i],
            report.eee_trace[i], report.lambda_trace[i],
            float(nu.min(initial=0.0)), float(nu.max(initial=0.0)),
            report.inner_iterations_per_outer[i],
        ])
    files = [write_csv(out / "convergence.csv", CONVERGENCE_HEADER, rows)]

    alloc = report.allocation
    alloc_rows = []
    if alloc is not None:
        k_users, n_sub = alloc.shape
        for k in range(k_users):
            for n in range(n_sub):
                alloc_rows.append([k + 1, n + 1, alloc.phi[k, n], alloc.p[k, n]])
    files.append(write_csv(out / "allocation.csv", ["k", "n", "phi", "p_w"], alloc_rows))

    ec = [] if report.ec_per_user is None else list(report.ec_per_user)
    thetas = [] if report.thetas is None else list(report.thetas)
    header = ["eee_bits_per_joule", "outer_iterations", "converged", "wall_time_s", "theta_seed"]
    header += [f"ec_user_{k + 1}_bits" for k in range(len(ec))]
    header += [f"theta_user_{k + 1}" for k in range(len(thetas))]
    # an empty report has no final efficiency yet; leave that cell blank
    final = report.eee_final if report.outer_iterations else ""
    row = [final, report.outer_iterations, report.converged, report.wall_time,
           "" if theta_seed is None else theta_seed] + ec + thetas
    for value in row:
        if isinstance(value, (float, np.floating)) and not math.isfinite(value):
            raise ValueError("non-finite value in summary")
    files.append(write_csv(out / "summary.csv", header, [row]))
    return files
