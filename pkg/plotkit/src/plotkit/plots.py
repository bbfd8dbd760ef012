"""Figure rendering from solver output files.

Every plot function returns the arrays it drew (keyed by output file), so
tests can verify the rendered data without scraping images.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import read_curve, read_trace, read_vtk

COST_SERIES = ("J1", "curve_energy", "mean_sq", "obstacle", "total")


@dataclass
class PlotSpec:
    which: str                      # cost | curves | compare | fields
    inputs: list
    out_dir: str
    rescale: bool = False

    def __post_init__(self):
        if self.which not in ("cost", "curves", "compare", "fields"):
            raise ValueError(f"unknown figure kind {self.which!r}")
        missing = [p for p in self.inputs if not os.path.exists(p)]
        if missing:
            raise FileNotFoundError(f"missing inputs: {', '.join(map(str, missing))}")
        if not self.inputs:
            raise ValueError("no input files given")


def rescale_series(y: np.ndarray) -> np.ndarray:
    """Min-max normalization to [0, 1]; constant series collapse to zero."""
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi == lo:
        return np.zeros_like(y)
    return (y - lo) / (hi - lo)


def _stem(path) -> str:
    return os.path.splitext(os.path.basename(str(path)))[0]


def plot_cost(trace_paths, out_dir, rescale=False) -> dict:
    """One cost-decay figure per trace file; returns the plotted series."""
    os.makedirs(out_dir, exist_ok=True)
    plotted = {}
    for path in trace_paths:
        data = read_trace(path)
        iters = data["iter"]
        fig, ax = plt.subplots(figsize=(7, 4.5))
        series = {}
        for name in COST_SERIES:
            y = rescale_series(data[name]) if rescale else data[name]
            series[name] = y
            ax.plot(iters, y, label=name, linewidth=1.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel("rescaled cost" if rescale else "cost")
        ax.legend(loc="best", fontsize=8)
        ax.set_title(_stem(path))
        out = os.path.join(out_dir, f"cost_{_stem(path)}.png")
        fig.savefig(out, dpi=130)
        plt.close(fig)
        plotted[out] = series
    return plotted


def _curve_label(path) -> str:
    stem = _stem(path)
    digits = "".join(ch for ch in stem if ch.isdigit())
    return f"iter {int(digits)}" if digits else stem


def plot_curves(curve_paths, out_dir, out_name="curves.png") -> dict:
    """Overlay of curve files with legend labels parsed from the names."""
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = {}
    for path in curve_paths:
        xi, vals = read_curve(path)
        label = _curve_label(path)
        ax.plot(xi, vals, label=label, linewidth=1.2)
        plotted[label] = (xi, vals)
    ax.set_xlabel("x")
    ax.set_ylabel("bottom height")
    ax.legend(loc="best", fontsize=8)
    out = os.path.join(out_dir, out_name)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return {out: plotted}


def plot_compare(curve_paths, out_dir) -> dict:
    """Final-curve comparison across runs (same overlay, run-name labels)."""
    return plot_curves(curve_paths, out_dir, out_name="compare.png")


def plot_fields(vtk_paths, out_dir) -> dict:
    """Filled-contour heatmap per scalar field of each VTK file."""
    os.makedirs(out_dir, exist_ok=True)
    plotted = {}
    for path in vtk_paths:
        mesh = read_vtk(path)
        pts, tris = mesh["points"], mesh["triangles"]
        for name, values in mesh["fields"].items():
            fig, ax = plt.subplots(figsize=(5, 4.5))
            spread = float(np.max(values) - np.min(values))
            if spread == 0.0:
                # degenerate range: flat shading, no contour machinery
                ax.tripcolor(pts[:, 0], pts[:, 1], tris, values)
            else:
                tcf = ax.tricontourf(pts[:, 0], pts[:, 1], tris, values, levels=24)
                fig.colorbar(tcf, ax=ax)
            ax.set_aspect("equal")
            ax.set_title(f"{name} ({_stem(path)})")
            out = os.path.join(out_dir, f"field_{_stem(path)}_{name}.png")
            fig.savefig(out, dpi=130)
            plt.close(fig)
            plotted[out] = values
    return plotted


def render(spec: PlotSpec) -> dict:
    if spec.which == "cost":
        return plot_cost(spec.inputs, spec.out_dir, rescale=spec.rescale)
    if spec.which == "curves":
        return plot_curves(spec.inputs, spec.out_dir)
    if spec.which == "compare":
        return plot_compare(spec.inputs, spec.out_dir)
    return plot_fields(spec.inputs, spec.out_dir)
