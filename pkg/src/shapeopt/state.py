"""Steady natural-convection state solver and objective evaluation.

The nonlinear system is solved by the fixed-point sweep that alternates a
Stokes solve (convection and buoyancy lagged to the right-hand side) with a
heat solve (convection of the lagged temperature by the fresh velocity).
The temperature is lifted by the interpolated boundary datum, so both linear
operators carry homogeneous Dirichlet conditions and are factorized once per
mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .geometry import BoundaryCurve, Mesh, curve_integrals, obstacle_penalty_integral
from .spaces import FEFunction


class NonconvergenceError(Exception):
    """Fixed-point iteration failed to reach the requested tolerance.

    Carries the relative-increment history; divergence signals parameters
    outside the contraction regime of the model.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless groups and data of the convection model."""

    re: float = 1.0
    pr: float = 0.7
    gr: float = 1.0
    alpha: float = 10.0
    g1: object = None  # momentum source: f(x, y) -> (f1, f2) arrays, or None
    g2: object = None  # heat source: f(x, y) -> array, or None

    def __post_init__(self):
        for name in ("re", "pr", "gr"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class StateSolution:
    v: FEFunction       # velocity, vector P2, zero on the whole boundary
    p: FEFunction       # pressure, P1, zero mean
    T_hat: FEFunction   # lifted temperature, zero trace
    T: FEFunction       # total temperature T_hat + interpolated datum
    picard_iters: int
    final_increment: float
    increments: list = field(default_factory=list)


@dataclass
class CostBreakdown:
    J1: float            # half squared L2 distance of T from its mean
    curve_energy: float  # integral of the squared curve slope
    mean_sq: float       # squared curve mean
    obstacle: float      # integral of the squared obstacle-excess plus part
    total: float
    I_T: float           # mean temperature


def solve_state(
    mesh: Mesh,
    params: PhysicalParams,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> StateSolution:
    """Solve the coupled velocity/temperature system by fixed-point iteration.

    Starting from rest, each sweep solves the Stokes system with the lagged
    convection, buoyancy and data terms on the right-hand side, then the heat
    system with the fresh velocity convecting the lagged temperature.  The
    loop stops when the combined relative H1-seminorm increment drops below
    ``tol``; exceeding ``max_iter`` raises :class:`NonconvergenceError`.
    """
    sv = assembly.vector_space(mesh)
    s2 = assembly.p2_space(mesh)
    td = assembly.interpolate_Td(mesh, params.alpha)
    stokes = assembly.stokes_operator(mesh, params.re)
    heat = assembly.heat_operator(mesh, params.re, params.pr)
    buoy = assembly.assemble_buoyancy(mesh, params.gr, params.re)
    g1 = assembly.vector_load(mesh, params.g1) if params.g1 is not None else 0.0
    g2 = assembly.scalar_load(mesh, params.g2) if params.g2 is not None else 0.0
    # lifting of the temperature datum through the diffusion term
    lift = assembly.assemble_temperature_laplacian(mesh, params.re, params.pr) @ td.coeffs

    v = np.zeros(sv.n_dofs)
    t_hat = np.zeros(s2.n_dofs)
    p = None
    increments = []
    for k in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            rhs_m = g1 + buoy @ (t_hat + td.coeffs) - assembly.b1_vector(mesh, v)
            v_new, p = stokes.solve(rhs_m, p_start=p)
            rhs_t = g2 - lift - assembly.b2_vector(mesh, v_new, t_hat + td.coeffs)
            t_hat_new = heat.solve(rhs_t)

            dv = assembly.h1_seminorm_sq(mesh, v_new - v)
            dt = assembly.h1_seminorm_sq(mesh, t_hat_new - t_hat)
            nv = assembly.h1_seminorm_sq(mesh, v_new)
            nt = assembly.h1_seminorm_sq(mesh, t_hat_new)
        norm = np.sqrt(nv) + np.sqrt(nt)
        inc = np.sqrt(dv) + np.sqrt(dt)
        if norm > 1e-300:
            inc /= norm
        increments.append(inc)
        if not np.isfinite(inc):
            raise NonconvergenceError(
                f"fixed point diverged after {k + 1} sweeps", increments
            )
        v, t_hat = v_new, t_hat_new
        if inc < tol:
            break
    else:
        raise NonconvergenceError(
            f"fixed point not converged after {max_iter} sweeps "
            f"(last increment {increments[-1]:.3e})",
            increments,
        )

    return StateSolution(
        v=FEFunction(sv, v),
        p=FEFunction(assembly.p1_space(mesh), p),
        T_hat=FEFunction(s2, t_hat),
        T=FEFunction(s2, t_hat + td.coeffs),
        picard_iters=len(increments),
        final_increment=increments[-1],
        increments=increments,
    )


def mean_temperature(t: FEFunction, mesh: Mesh) -> float:
    """Exact mesh integral of a P2 field divided by the mesh area."""
    load = assembly.load_p2(mesh)
    area = float(np.sum(mesh.triangle_areas()))
    return float(load @ t.coeffs) / area


def evaluate_cost(
    state: StateSolution,
    curve: BoundaryCurve,
    lam1: float,
    lam2: float,
    lam3: float,
    nu: float,
) -> CostBreakdown:
    """All cost components for a solved state on the mesh built from ``curve``."""
    mesh = state.T.space.mesh
    i_t = mean_temperature(state.T, mesh)
    dev = state.T.coeffs - i_t  # constants are represented exactly in P2
    j1 = 0.5 * float(dev @ (assembly.scalar_mass(mesh) @ dev))
    mean, energy = curve_integrals(curve)
    obstacle = obstacle_penalty_integral(curve, nu)
    total = j1 + 0.5 * lam1 * energy + 0.5 * lam2 * mean**2 + 0.5 * lam3 * obstacle
    return CostBreakdown(
        J1=j1,
        curve_energy=energy,
        mean_sq=mean**2,
        obstacle=obstacle,
        total=total,
        I_T=i_t,
    )
