"""CSV persistence for runs, experiment tables, and fit summaries.

Every file starts with a single '#'-prefixed header of key=value metadata
(the fully resolved configuration and seed of the producing run), then a
normal CSV header row and data rows.  Floats are written with 17
significant digits so a read back reproduces them bit-for-bit.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .analysis import LengthScaleEstimate, PowerLawFit
from .assimilation import RunRecord
from .experiments import MinNodesResult, VelocityResult
from .solver import Field, SolverConfig


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _header_line(meta: dict) -> str:
    parts = [f"{k}={format_value(v)}" for k, v in meta.items()]
    return "# " + " ".join(parts)


def parse_header_line(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise ValueError("expected a '#' metadata header line")
    meta = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise ValueError(f"malformed metadata token {tok!r}")
        k, _, v = tok.partition("=")
        meta[k] = v
    return meta


def write_table(path, columns: dict[str, list], meta: dict) -> None:
    """Write named columns with a metadata header; columns must align."""
    path = Path(path)
    names = list(columns)
    lengths = {len(col) for col in columns.values()}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: {sorted(lengths)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(_header_line(meta) + "\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*columns.values()):
            writer.writerow([format_value(v) for v in row])


def read_table(path) -> tuple[dict[str, str], dict[str, list[str]]]:
    """Read back a metadata header plus named string columns."""
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = parse_header_line(first)
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: no column header after metadata line")
        cols: dict[str, list[str]] = {n: [] for n in names}
        for row in reader:
            if not row:
                continue
            for n, v in zip(names, row):
                cols[n].append(v)
    return meta, cols


def float_column(cols: dict[str, list[str]], name: str, path="table") -> np.ndarray:
    if name not in cols:
        raise KeyError(f"{path}: missing column {name!r}")
    return np.array([float(v) if v != "" else math.nan for v in cols[name]])


def write_run_record(path, record: RunRecord, meta: dict) -> None:
    columns = {
        "time": list(record.times),
        "l2_error": list(record.l2_errors),
        "linf_error": list(record.linf_errors),
    }
    if record.probe_positions is not None:
        columns["probe_position"] = list(record.probe_positions)
    full_meta = dict(meta)
    full_meta["converged_at"] = record.converged_at
    write_table(path, columns, full_meta)


def read_run_record(path) -> tuple[dict[str, str], RunRecord]:
    meta, cols = read_table(path)
    probe = float_column(cols, "probe_position", path) if "probe_position" in cols else None
    converged = meta.get("converged_at", "")
    return meta, RunRecord(
        times=float_column(cols, "time", path),
        l2_errors=float_column(cols, "l2_error", path),
        linf_errors=float_column(cols, "linf_error", path),
        converged_at=float(converged) if converged else None,
        probe_positions=probe,
    )


def write_snapshot(path, config: SolverConfig, meta: dict, u: Field, v: Field | None = None) -> None:
    columns: dict[str, list] = {"x": list(config.mesh), "u": list(u.values)}
    if v is not None:
        columns["v"] = list(v.values)
    full_meta = dict(meta)
    full_meta["t"] = u.time
    write_table(path, columns, full_meta)


def write_min_nodes(path, results: list[MinNodesResult], meta: dict) -> None:
    write_table(
        path,
        {
            "nu": [r.nu for r in results],
            "seed": [r.seed for r in results],
            "obs_kind": [r.obs_kind for r in results],
            "m_h": [r.m_h for r in results],
            "spin_up_time": [r.spin_up_time for r in results],
            "n_runs": [len(r.probes) for r in results],
            "error": [r.error or "" for r in results],
        },
        meta,
    )


def read_min_nodes_pairs(path, obs_kind: str | None = None) -> list[tuple[float, int]]:
    """(nu, m_h) pairs of the converged rows, optionally filtered by kind."""
    _, cols = read_table(path)
    pairs = []
    for nu, kind, m_h in zip(cols["nu"], cols["obs_kind"], cols["m_h"]):
        if m_h == "":
            continue
        if obs_kind is not None and kind != obs_kind:
            continue
        pairs.append((float(nu), int(m_h)))
    return pairs


def write_velocity_results(
    path, results: list[VelocityResult], meta: dict, conjectured: set[float] | None = None
) -> None:
    columns = {
        "c": [r.c for r in results],
        "m": [r.m for r in results],
        "converge_time": [r.converge_time for r in results],
        "locked": [r.locked for r in results],
    }
    if conjectured is not None:
        columns["conjectured_locked"] = [r.c in conjectured for r in results]
    write_table(path, columns, meta)


def write_size_table(path, table: dict[int, float], meta: dict, fit: PowerLawFit | None = None) -> None:
    full_meta = dict(meta)
    if fit is not None:
        full_meta["fit_prefactor"] = fit.c0
        full_meta["fit_exponent"] = -fit.p
    write_table(
        path,
        {"m": list(table), "mean_time": [table[m] for m in table]},
        full_meta,
    )


def write_fit_summary(path, fit: PowerLawFit, meta: dict) -> None:
    write_table(
        path,
        {
            "c0": [fit.c0],
            "p": [fit.p],
            "log_residual_std": [fit.log_residual_std],
            "n_points": [fit.n_points],
            "nu_min": [fit.x_min],
            "nu_max": [fit.x_max],
        },
        meta,
    )


def read_fit_summary(path) -> tuple[dict[str, str], PowerLawFit]:
    meta, cols = read_table(path)
    return meta, PowerLawFit(
        c0=float(cols["c0"][0]),
        p=float(cols["p"][0]),
        log_residual_std=float(cols["log_residual_std"][0]),
        n_points=int(cols["n_points"][0]),
        x_min=float(cols["nu_min"][0]),
        x_max=float(cols["nu_max"][0]),
    )


def write_lambda_table(path, estimates: list[LengthScaleEstimate], meta: dict) -> None:
    write_table(
        path,
        {
            "nu": [e.nu for e in estimates],
            "lambda": [e.lam for e in estimates],
            "n_s": [e.n_s for e in estimates],
            "extrapolated": [e.extrapolated for e in estimates],
        },
        meta,
    )
