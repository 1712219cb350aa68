"""Renderers for the five figure families.

Every renderer takes resolved input paths and returns a matplotlib Figure
with the spec's axis scales applied; render() saves it deterministically.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spec import PlotSpec, resolve_inputs
from .tables import TableError, floats, read_table

FIGSIZE = (7.0, 4.5)
DPI = 120


def _label_from_meta(meta, path):
    if "label" in meta:
        return meta["label"].replace("_", " ")
    return Path(path).stem


def _snapshots(spec, paths):
    n = len(paths)
    ncols = min(n, 2)
    nrows = math.ceil(n / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(FIGSIZE[0], 2.6 * nrows), squeeze=False)
    for ax in axes.flat[n:]:
        ax.set_visible(False)
    for ax, path in zip(axes.flat, paths):
        meta, cols = read_table(path)
        x = floats(cols, "x", path)
        ax.plot(x, floats(cols, "u", path), label="reference", lw=1.2)
        if "v" in cols:
            ax.plot(x, floats(cols, "v", path), label="assimilated", lw=1.0)
        if "probe_x" in meta:
            ax.plot(float(meta["probe_x"]), 0.0, "r+", markersize=12, label="probe")
        ax.set_title(f"t = {meta.get('t', '?')}", fontsize=9)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    axes.flat[0].legend(fontsize=7)
    return fig


def _error_curves(spec, paths):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for path in paths:
        meta, cols = read_table(path)
        t = floats(cols, "time", path)
        e = floats(cols, "l2_error", path)
        keep = e > 0
        ax.plot(t[keep], e[keep], lw=1.0, label=_label_from_meta(meta, path))
    ax.set_xlabel("time")
    ax.set_ylabel("L2 error")
    ax.legend(fontsize=8)
    return fig


def _min_nodes_fit(spec, paths):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    fit = None
    for path in paths:
        meta, cols = read_table(path)
        if "c0" in cols:
            fit = (
                float(cols["c0"][0]),
                float(cols["p"][0]),
                float(cols["log_residual_std"][0]),
            )
            continue
        nu = floats(cols, "nu", path)
        m_h = floats(cols, "m_h", path)
        keep = ~np.isnan(m_h)
        kind = cols.get("obs_kind", ["?"])[0]
        ax.scatter(nu[keep], m_h[keep], s=18, label=f"{kind} grid")
    if fit is not None:
        c0, p, band = fit
        lo, hi = ax.get_xlim()
        xs = np.geomspace(max(lo, 1e-12), hi, 200)
        ax.plot(xs, c0 * xs**-p, "k-", lw=1.0, label=f"{c0:.3f} nu^-{p:.3f}")
        ax.fill_between(
            xs,
            c0 * math.exp(-band) * xs**-p,
            c0 * math.exp(band) * xs**-p,
            color="k",
            alpha=0.15,
            label=f"e^(+-{band:.3f}) band",
        )
    ax.set_xlabel("nu")
    ax.set_ylabel("minimum node count")
    ax.legend(fontsize=8)
    return fig


def _velocity_times(spec, paths):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for path in paths:
        meta, cols = read_table(path)
        c = floats(cols, "c", path)
        t = floats(cols, "converge_time", path)
        locked = [v == "true" for v in cols.get("locked", [""] * c.size)]
        cap = float(meta.get("time_cap", np.nanmax(t) if np.any(~np.isnan(t)) else 1.0))
        conv = ~np.isnan(t)
        free = conv & ~np.array(locked)
        slow = conv & np.array(locked)
        ax.plot(c[free], t[free], "o", ms=5, label="converged")
        if slow.any():
            ax.plot(c[slow], t[slow], "s", ms=6, color="tab:orange", label="locked (slow)")
        missing = ~conv
        if missing.any():
            ax.plot(c[missing], np.full(missing.sum(), cap), "rx", ms=8, label="locked (no convergence)")
    ax.set_xlabel("probe speed (dx/dt)")
    ax.set_ylabel("time to convergence")
    ax.legend(fontsize=8)
    return fig


def _size_scaling(spec, paths):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for path in paths:
        meta, cols = read_table(path)
        m = floats(cols, "m", path)
        t = floats(cols, "mean_time", path)
        ax.plot(m, t, "o", ms=6, label="mean convergence time")
        if "fit_prefactor" in meta:
            a = float(meta["fit_prefactor"])
            b = float(meta["fit_exponent"])
            xs = np.geomspace(m.min(), m.max(), 100)
            ax.plot(xs, a * xs**b, "k-", lw=1.0, label=f"{a:.1f} M^{b:.3f}")
    ax.set_xlabel("probe size M")
    ax.set_ylabel("mean time to convergence")
    ax.legend(fontsize=8)
    return fig


_RENDERERS = {
    "snapshots": _snapshots,
    "error_curves": _error_curves,
    "min_nodes_fit": _min_nodes_fit,
    "velocity_times": _velocity_times,
    "size_scaling": _size_scaling,
}


def build_figure(spec: PlotSpec, data_dir):
    paths = resolve_inputs(spec, data_dir)
    fig = _RENDERERS[spec.kind](spec, paths)
    for ax in fig.axes:
        if ax.get_visible():
            ax.set_xscale(spec.x_scale)
            ax.set_yscale(spec.y_scale)
    if spec.title:
        fig.suptitle(spec.title, fontsize=10)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec, data_dir, out_dir) -> Path:
    """Render the figure to out_dir/spec.output; identical inputs give identical bytes."""
    fig = build_figure(spec, data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / spec.output
    fig.savefig(out_path, dpi=DPI, metadata={"Software": "acplots"})
    plt.close(fig)
    return out_path
