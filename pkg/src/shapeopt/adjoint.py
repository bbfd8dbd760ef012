"""Coupled linear adjoint system around a converged state.

The adjoint velocity/pressure/temperature (w, q, S) satisfy, for every
admissible test pair, the linearized-transposed momentum equation (viscous
term, reversed transport -b1(v, w, .), reaction b1(w, v, .), temperature
coupling through grad T) and the heat equation (diffusion, reversed
transport, buoyancy coupling back to w), driven only by the temperature
deviation T - mean(T).  The default path assembles and factorizes the whole
block system once; a fixed-point sweep mirroring the state solver is kept as
an independent cross-check and fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import assembly
from .geometry import Mesh
from .spaces import FEFunction
from .state import NonconvergenceError, PhysicalParams, StateSolution, mean_temperature


@dataclass
class AdjointSolution:
    w: FEFunction  # adjoint velocity, zero on the whole boundary
    q: FEFunction  # adjoint pressure, zero mean
    S: FEFunction  # adjoint temperature, zero trace
    residual_norm: float
    increments: list = field(default_factory=list)  # sweep history (fixed point only)


def _blocks(state: StateSolution, mesh: Mesh, params: PhysicalParams):
    """Block matrix and right-hand side of the adjoint system (before BCs)."""
    sv = assembly.vector_space(mesh)
    s2 = assembly.p2_space(mesh)
    s1 = assembly.p1_space(mesh)

    conv = assembly.assemble_convection_b2(mesh, state.v)  # shared scalar kernel
    a_w = (
        assembly.vector_stiffness(mesh) * (1.0 / params.re)
        - sp.block_diag((conv, conv)).tocsr()
        + assembly.assemble_gradient_reaction(mesh, state.v)
    )
    coupling_s = assembly.assemble_b2_velocity_form(mesh, state.T).T.tocsr()
    a_s = assembly.assemble_temperature_laplacian(mesh, params.re, params.pr) - conv
    buoy = assembly.assemble_buoyancy(mesh, 1.0, 1.0)  # plain (chi, phi_y) pairing
    b_div = assembly.divergence_matrix(mesh)
    gauge = sp.csr_matrix(assembly.load_p1(mesh)[:, None])

    i_t = mean_temperature(state.T, mesh)
    rhs_s = assembly.scalar_mass(mesh) @ (state.T.coeffs - i_t)

    block = sp.bmat(
        [
            [a_w, -b_div.T, None, coupling_s],
            [-b_div, None, gauge, None],
            [None, gauge.T, None, None],
            [-(params.gr / params.re**2) * buoy.T, None, None, a_s],
        ]
    ).tocsr()
    rhs = np.concatenate([np.zeros(sv.n_dofs + s1.n_dofs + 1), rhs_s])
    mask = np.concatenate(
        [
            sv.dirichlet_mask(),
            np.zeros(s1.n_dofs + 1, dtype=bool),
            s2.dirichlet_mask(),
        ]
    )
    return block, rhs, mask, (sv, s1, s2)


def _residual(block, rhs, mask, x) -> float:
    r = block @ x - rhs
    r[mask] = 0.0
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(r) / (scale if scale > 0.0 else 1.0))


def solve_adjoint(
    state: StateSolution, mesh: Mesh, params: PhysicalParams
) -> AdjointSolution:
    """Monolithic sparse direct solve of the coupled adjoint block system."""
    block, rhs, mask, (sv, s1, s2) = _blocks(state, mesh, params)
    a = assembly.apply_dirichlet(block, mask)
    b = np.where(mask, 0.0, rhs)
    try:
        x = splu(a.tocsc()).solve(b)
    except RuntimeError as err:
        raise assembly.SolverError(f"adjoint factorization failed: {err}") from err
    if not np.all(np.isfinite(x)):
        raise assembly.SolverError("adjoint solve produced non-finite values")

    nv, np1 = sv.n_dofs, s1.n_dofs
    w = x[:nv]
    q = x[nv : nv + np1]
    s_coef = x[nv + np1 + 1 :]
    return AdjointSolution(
        w=FEFunction(sv, w),
        q=FEFunction(s1, q),
        S=FEFunction(s2, s_coef),
        residual_norm=_residual(a, b, mask, x),
    )


def fixed_point_adjoint(
    state: StateSolution,
    mesh: Mesh,
    params: PhysicalParams,
    tol: float = 1e-12,
    max_iter: int = 200,
    compute_residual: bool = True,
) -> AdjointSolution:
    """Contraction sweep for the adjoint system, reusing the state factorizations.

    Alternates the Stokes solve for w (transport, reaction and the
    temperature coupling on the right-hand side) with the heat solve for S
    (reversed transport, buoyancy coupling and the mean-deviation source).
    Agrees with :func:`solve_adjoint` to solver accuracy inside the
    contraction regime and serves as its independent oracle.
    """
    sv = assembly.vector_space(mesh)
    s2 = assembly.p2_space(mesh)
    s1 = assembly.p1_space(mesh)
    stokes = assembly.stokes_operator(mesh, params.re)
    heat = assembly.heat_operator(mesh, params.re, params.pr)

    c2v = assembly.assemble_convection_b2(mesh, state.v)
    b1v = sp.block_diag((c2v, c2v)).tocsr()  # same scalar kernel per component
    react = assembly.assemble_gradient_reaction(mesh, state.v)
    coupling = assembly.assemble_b2_velocity_form(mesh, state.T)  # rows scalar
    buoy = assembly.assemble_buoyancy(mesh, 1.0, 1.0)

    i_t = mean_temperature(state.T, mesh)
    rhs_s = assembly.scalar_mass(mesh) @ (state.T.coeffs - i_t)

    w = np.zeros(sv.n_dofs)
    s_coef = np.zeros(s2.n_dofs)
    q = None
    increments = []
    for _ in range(max_iter):
        w_new, q = stokes.solve(b1v @ w - react @ w - coupling.T @ s_coef, p_start=q)
        s_new = heat.solve(
            c2v @ s_coef + (params.gr / params.re**2) * (buoy.T @ w_new) + rhs_s
        )
        inc = np.sqrt(assembly.h1_seminorm_sq(mesh, w_new - w)) + np.sqrt(
            assembly.h1_seminorm_sq(mesh, s_new - s_coef)
        )
        norm = np.sqrt(assembly.h1_seminorm_sq(mesh, w_new)) + np.sqrt(
            assembly.h1_seminorm_sq(mesh, s_new)
        )
        if norm > 1e-300:
            inc /= norm
        increments.append(inc)
        w, s_coef = w_new, s_new
        if inc < tol:
            break
    else:
        raise NonconvergenceError(
            f"adjoint fixed point not converged after {max_iter} sweeps "
            f"(last increment {increments[-1]:.3e})",
            increments,
        )

    if compute_residual:
        block, rhs, mask, _ = _blocks(state, mesh, params)
        a = assembly.apply_dirichlet(block, mask)
        b = np.where(mask, 0.0, rhs)
        x = np.concatenate([w, q, [0.0], s_coef])
        residual = _residual(a, b, mask, x)
    else:
        # the sweep increment already bounds the error; skip the diagnostic
        residual = float("nan")
    return AdjointSolution(
        w=FEFunction(sv, w),
        q=FEFunction(s1, q),
        S=FEFunction(s2, s_coef),
        residual_norm=residual,
        increments=increments,
    )
