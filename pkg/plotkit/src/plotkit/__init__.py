"""Offline figure rendering for shape-optimization run outputs."""

from .plots import PlotSpec, plot_compare, plot_cost, plot_curves, plot_fields, render
from .readers import FormatError, read_curve, read_trace, read_vtk

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "PlotSpec",
    "plot_compare",
    "plot_cost",
    "plot_curves",
    "plot_fields",
    "read_curve",
    "read_trace",
    "read_vtk",
    "render",
]
