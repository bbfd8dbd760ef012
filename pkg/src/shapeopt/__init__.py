"""Shape optimization of a convection container bottom for uniform temperature.

A finite-element toolkit that deforms the bottom boundary of a
two-dimensional container holding a buoyancy-driven fluid so the steady
temperature field becomes as uniform as possible, by adjoint-based
preconditioned gradient descent.
"""

from .adjoint import AdjointSolution, fixed_point_adjoint, solve_adjoint
from .geometry import (
    BoundaryCurve,
    GeometryError,
    Mesh,
    bottom_normal,
    build_mesh,
    curve_eval,
    curve_integrals,
    curve_second_difference,
    read_curve,
    write_curve,
)
from .optim import IterationRecord, OptimizerConfig, Trace, descend, run_case
from .shapegrad import (
    GradientSample,
    directional_derivative,
    finite_difference_check,
    gradient_sample,
    optimality_residual,
    precondition,
    regularized_gradient,
    shape_density_F,
)
from .state import (
    CostBreakdown,
    NonconvergenceError,
    PhysicalParams,
    StateSolution,
    evaluate_cost,
    mean_temperature,
    solve_state,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointSolution",
    "BoundaryCurve",
    "CostBreakdown",
    "GeometryError",
    "GradientSample",
    "IterationRecord",
    "Mesh",
    "NonconvergenceError",
    "OptimizerConfig",
    "PhysicalParams",
    "StateSolution",
    "Trace",
    "bottom_normal",
    "build_mesh",
    "curve_eval",
    "curve_integrals",
    "curve_second_difference",
    "descend",
    "directional_derivative",
    "evaluate_cost",
    "finite_difference_check",
    "fixed_point_adjoint",
    "gradient_sample",
    "mean_temperature",
    "optimality_residual",
    "precondition",
    "read_curve",
    "regularized_gradient",
    "run_case",
    "shape_density_F",
    "solve_adjoint",
    "solve_state",
    "write_curve",
]
