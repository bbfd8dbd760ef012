"""Assembly of the bilinear/trilinear forms of the flow and heat equations.

All element loops are vectorized over the whole triangulation; a per-mesh
cache holds jacobians, basis tables, spaces and the constant operators so
repeated solves on one mesh never re-assemble them.  A single degree-5
triangle rule is used everywhere, which integrates every form below exactly
(the trilinear convection terms contain one gradient, so their integrands
are degree 5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import Mesh
from .spaces import (
    P1_GRADS,
    QUAD_POINTS,
    QUAD_WEIGHTS,
    VECTOR_P2,
    FEFunction,
    FunctionSpace,
    p1_values,
    p2_gradients,
    p2_values,
    scalar_p1_space,
    scalar_p2_space,
    vector_p2_space,
)

_P2_VALS = p2_values(QUAD_POINTS)        # (nq, 6)
_P2_GRADS = p2_gradients(QUAD_POINTS)    # (nq, 6, 2)
_P1_VALS = p1_values(QUAD_POINTS)        # (nq, 3)


class SolverError(Exception):
    """A linear solve failed (singular or badly scaled system)."""


@dataclass(eq=False)
class ElementData:
    det: np.ndarray       # (nt,) jacobian determinants, positive
    inv_jt: np.ndarray    # (nt, 2, 2) inverse-transpose jacobians
    grads2: np.ndarray    # (nt, nq, 6, 2) physical P2 gradients
    grads1: np.ndarray    # (nt, 3, 2) physical P1 gradients (constant)
    qpoints: np.ndarray   # (nt, nq, 2) physical quadrature points


def _cached(mesh: Mesh, key, builder):
    entry = mesh._cache
    if key not in entry:
        entry[key] = builder()
    return entry[key]


def element_data(mesh: Mesh) -> ElementData:
    def build():
        pts = mesh.vertices[mesh.triangles]            # (nt, 3, 2)
        e1 = pts[:, 1] - pts[:, 0]
        e2 = pts[:, 2] - pts[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        inv_jt = np.empty((len(det), 2, 2))
        inv_jt[:, 0, 0] = e2[:, 1]
        inv_jt[:, 0, 1] = -e1[:, 1]
        inv_jt[:, 1, 0] = -e2[:, 0]
        inv_jt[:, 1, 1] = e1[:, 0]
        inv_jt /= det[:, None, None]
        grads2 = np.einsum("tde,qie->tqid", inv_jt, _P2_GRADS)
        grads1 = np.einsum("tde,ie->tid", inv_jt, P1_GRADS)
        qpoints = pts[:, None, 0, :] + np.einsum(
            "qr,trd->tqd", QUAD_POINTS, np.stack([e1, e2], axis=1)
        )
        return ElementData(det, inv_jt, grads2, grads1, qpoints)

    return _cached(mesh, "eldata", build)


def p2_space(mesh: Mesh) -> FunctionSpace:
    return _cached(mesh, "p2", lambda: scalar_p2_space(mesh))


def p1_space(mesh: Mesh) -> FunctionSpace:
    return _cached(mesh, "p1", lambda: scalar_p1_space(mesh))


def vector_space(mesh: Mesh) -> FunctionSpace:
    return _cached(mesh, "vec", lambda: vector_p2_space(mesh, p2_space(mesh)))


def _scatter(rows_map, cols_map, local, shape) -> sp.csr_matrix:
    nt, nr, nc = local.shape
    rows = np.repeat(rows_map, nc, axis=1).ravel()
    cols = np.tile(cols_map, (1, nr)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


def _scatter_vector(dof_map, local, n_dofs) -> np.ndarray:
    return np.bincount(dof_map.ravel(), weights=local.ravel(), minlength=n_dofs)


def scalar_stiffness(mesh: Mesh) -> sp.csr_matrix:
    def build():
        ed = element_data(mesh)
        s = p2_space(mesh)
        local = np.einsum("q,tqid,tqjd,t->tij", QUAD_WEIGHTS, ed.grads2, ed.grads2, ed.det)
        return _scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs))

    return _cached(mesh, "Ks", build)


def scalar_mass(mesh: Mesh) -> sp.csr_matrix:
    def build():
        ed = element_data(mesh)
        s = p2_space(mesh)
        local = np.einsum("q,qi,qj,t->tij", QUAD_WEIGHTS, _P2_VALS, _P2_VALS, ed.det)
        return _scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs))

    return _cached(mesh, "Ms", build)


def load_p2(mesh: Mesh) -> np.ndarray:
    """Integrals of the P2 basis functions (duality pairing with 1)."""
    def build():
        ed = element_data(mesh)
        s = p2_space(mesh)
        local = np.einsum("q,qi,t->ti", QUAD_WEIGHTS, _P2_VALS, ed.det)
        return _scatter_vector(s.dof_map, local, s.n_dofs)

    return _cached(mesh, "load2", build)


def load_p1(mesh: Mesh) -> np.ndarray:
    def build():
        ed = element_data(mesh)
        s = p1_space(mesh)
        local = np.einsum("q,qi,t->ti", QUAD_WEIGHTS, _P1_VALS, ed.det)
        return _scatter_vector(s.dof_map, local, s.n_dofs)

    return _cached(mesh, "load1", build)


def divergence_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Pressure-velocity coupling: rows are P1 tests against div of vector P2."""
    def build():
        ed = element_data(mesh)
        s2, s1 = p2_space(mesh), p1_space(mesh)
        blocks = []
        for c in range(2):
            local = np.einsum(
                "q,qi,tqj,t->tij", QUAD_WEIGHTS, _P1_VALS, ed.grads2[..., c], ed.det
            )
            blocks.append(_scatter(s1.dof_map, s2.dof_map, local, (s1.n_dofs, s2.n_dofs)))
        return sp.hstack(blocks).tocsr()

    return _cached(mesh, "Bdiv", build)


def vector_stiffness(mesh: Mesh) -> sp.csr_matrix:
    def build():
        k = scalar_stiffness(mesh)
        return sp.block_diag((k, k)).tocsr()

    return _cached(mesh, "Kvec", build)


def assemble_stokes(mesh: Mesh, re: float):
    """Viscous block (1/Re)(grad v, grad phi) and the divergence coupling."""
    return (vector_stiffness(mesh) * (1.0 / re), divergence_matrix(mesh))


def assemble_temperature_laplacian(mesh: Mesh, re: float, pr: float) -> sp.csr_matrix:
    return scalar_stiffness(mesh) * (1.0 / (re * pr))


def assemble_buoyancy(mesh: Mesh, gr: float, re: float) -> sp.csr_matrix:
    """Temperature-to-momentum coupling (Gr/Re^2)(T e2, phi); rows vector dofs."""
    ns = p2_space(mesh).n_dofs
    m = scalar_mass(mesh) * (gr / re**2)
    return sp.bmat([[sp.csr_matrix((ns, ns))], [m]]).tocsr()


def _split(coeffs: np.ndarray):
    ns = coeffs.size // 2
    return coeffs[:ns], coeffs[ns:]


def _velocity_at_qp(mesh: Mesh, coeffs: np.ndarray):
    s = p2_space(mesh)
    ux, uy = _split(coeffs)
    lx, ly = ux[s.dof_map], uy[s.dof_map]
    return (
        np.einsum("ti,qi->tq", lx, _P2_VALS),
        np.einsum("ti,qi->tq", ly, _P2_VALS),
    )


def _scalar_grad_at_qp(mesh: Mesh, coeffs: np.ndarray):
    ed = element_data(mesh)
    s = p2_space(mesh)
    return np.einsum("ti,tqid->tqd", coeffs[s.dof_map], ed.grads2)


def _scalar_at_qp(mesh: Mesh, coeffs: np.ndarray):
    s = p2_space(mesh)
    return np.einsum("ti,qi->tq", coeffs[s.dof_map], _P2_VALS)


def _scalar_convection(mesh: Mesh, vx, vy) -> sp.csr_matrix:
    """Matrix of T -> integral (v.grad T) phi for quadrature-point velocities."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    conv = vx[..., None] * ed.grads2[..., 0] + vy[..., None] * ed.grads2[..., 1]
    local = np.einsum("q,qi,tqj,t->tij", QUAD_WEIGHTS, _P2_VALS, conv, ed.det)
    return _scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs))


def assemble_convection_b1(mesh: Mesh, vbar: FEFunction) -> sp.csr_matrix:
    """Operator w -> integral (vbar . grad w) . phi on the vector space."""
    vx, vy = _velocity_at_qp(mesh, vbar.coeffs)
    c = _scalar_convection(mesh, vx, vy)
    return sp.block_diag((c, c)).tocsr()


def assemble_convection_b2(mesh: Mesh, vbar: FEFunction) -> sp.csr_matrix:
    """Operator T -> integral (vbar . grad T) phi on the scalar space."""
    vx, vy = _velocity_at_qp(mesh, vbar.coeffs)
    return _scalar_convection(mesh, vx, vy)


def assemble_b2_velocity_form(mesh: Mesh, tbar: FEFunction) -> sp.csr_matrix:
    """Operator phi -> integral (phi . grad tbar) chi; rows scalar, cols vector."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    gt = _scalar_grad_at_qp(mesh, tbar.coeffs)  # (nt, nq, 2)
    blocks = []
    for c in range(2):
        local = np.einsum(
            "q,qi,tq,qj,t->tij", QUAD_WEIGHTS, _P2_VALS, gt[..., c], _P2_VALS, ed.det
        )
        blocks.append(_scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs)))
    return sp.hstack(blocks).tocsr()


def assemble_gradient_reaction(mesh: Mesh, vbar: FEFunction) -> sp.csr_matrix:
    """Operator w -> integral (w . grad vbar) . phi on the vector space."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    vx_c, vy_c = _split(vbar.coeffs)
    gx = np.einsum("ti,tqid->tqd", vx_c[s.dof_map], ed.grads2)  # grad of component x
    gy = np.einsum("ti,tqid->tqd", vy_c[s.dof_map], ed.grads2)
    grads = {(0, 0): gx[..., 0], (0, 1): gx[..., 1], (1, 0): gy[..., 0], (1, 1): gy[..., 1]}
    blocks = [[None, None], [None, None]]
    for c in range(2):
        for d in range(2):
            local = np.einsum(
                "q,qi,tq,qj,t->tij", QUAD_WEIGHTS, _P2_VALS, grads[(c, d)], _P2_VALS, ed.det
            )
            blocks[c][d] = _scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs))
    return sp.bmat(blocks).tocsr()


def b1_vector(mesh: Mesh, v_coeffs: np.ndarray) -> np.ndarray:
    """Dual vector of integral (v . grad v) . phi over the vector test space."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    vx, vy = _velocity_at_qp(mesh, v_coeffs)
    cx, cy = _split(v_coeffs)
    out = []
    for comp in (cx, cy):
        g = np.einsum("ti,tqid->tqd", comp[s.dof_map], ed.grads2)
        conv = vx * g[..., 0] + vy * g[..., 1]
        local = np.einsum("q,tq,qi,t->ti", QUAD_WEIGHTS, conv, _P2_VALS, ed.det)
        out.append(_scatter_vector(s.dof_map, local, s.n_dofs))
    return np.concatenate(out)


def b2_vector(mesh: Mesh, v_coeffs: np.ndarray, t_coeffs: np.ndarray) -> np.ndarray:
    """Dual vector of integral (v . grad T) chi over the scalar test space."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    vx, vy = _velocity_at_qp(mesh, v_coeffs)
    g = _scalar_grad_at_qp(mesh, t_coeffs)
    conv = vx * g[..., 0] + vy * g[..., 1]
    local = np.einsum("q,tq,qi,t->ti", QUAD_WEIGHTS, conv, _P2_VALS, ed.det)
    return _scatter_vector(s.dof_map, local, s.n_dofs)


def scalar_load(mesh: Mesh, f) -> np.ndarray:
    """Dual vector of a scalar source f(x1, x2) against the P2 tests."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    fq = np.asarray(f(ed.qpoints[..., 0], ed.qpoints[..., 1]), dtype=float)
    local = np.einsum("q,tq,qi,t->ti", QUAD_WEIGHTS, fq, _P2_VALS, ed.det)
    return _scatter_vector(s.dof_map, local, s.n_dofs)


def vector_load(mesh: Mesh, f) -> np.ndarray:
    """Dual vector of a 2-vector source f(x1, x2) -> (f1, f2) arrays."""
    ed = element_data(mesh)
    s = p2_space(mesh)
    f1, f2 = f(ed.qpoints[..., 0], ed.qpoints[..., 1])
    out = []
    for fq in (np.asarray(f1, dtype=float), np.asarray(f2, dtype=float)):
        local = np.einsum("q,tq,qi,t->ti", QUAD_WEIGHTS, fq, _P2_VALS, ed.det)
        out.append(_scatter_vector(s.dof_map, local, s.n_dofs))
    return np.concatenate(out)


def interpolate_Td(mesh: Mesh, alpha: float) -> FEFunction:
    """Nodal interpolant of the prescribed bottom temperature

        alpha * x1 * (1 - x1) * (1 - x2),

    which vanishes on the side and top walls by construction.
    """
    s = p2_space(mesh)
    x, y = s.node_coords[:, 0], s.node_coords[:, 1]
    return FEFunction(s, alpha * x * (1.0 - x) * (1.0 - y))


def h1_seminorm_sq(mesh: Mesh, coeffs: np.ndarray) -> float:
    """Squared H1 seminorm of a scalar or component-blocked vector field."""
    k = scalar_stiffness(mesh)
    if coeffs.size == 2 * k.shape[0]:
        cx, cy = _split(coeffs)
        return float(cx @ (k @ cx) + cy @ (k @ cy))
    return float(coeffs @ (k @ coeffs))


def _locate_bottom(mesh: Mesh, xi: float):
    """Bottom edge containing xi (left edge at shared abscissae) and the edge point."""
    bx = mesh.bottom_xi
    j = int(np.searchsorted(bx, xi, side="left")) - 1
    j = min(max(j, 0), len(bx) - 2)
    va, vb = mesh.bottom_trace[j], mesh.bottom_trace[j + 1]
    t = (xi - bx[j]) / (bx[j + 1] - bx[j])
    y = mesh.vertices[va, 1] * (1.0 - t) + mesh.vertices[vb, 1] * t
    return int(mesh.bottom_tris[j]), np.array([xi, y])


def _reference_point(mesh: Mesh, tri: int, point: np.ndarray) -> np.ndarray:
    p0 = mesh.vertices[mesh.triangles[tri, 0]]
    ed = element_data(mesh)
    # inv(J) = inv_jt.T
    return ed.inv_jt[tri].T @ (point - p0)


def evaluate_gradient_on_bottom(u: FEFunction, mesh: Mesh, xi: float) -> np.ndarray:
    """Gradient of a P2 field in the triangle resting on the bottom edge at xi.

    Scalar fields give a 2-vector, vector fields the 2x2 matrix of component
    gradients.  At shared vertex abscissae the edge to the left is used.
    """
    tri, point = _locate_bottom(mesh, xi)
    ed = element_data(mesh)
    ref = _reference_point(mesh, tri, point)
    gref = p2_gradients(ref[None, :])[0]          # (6, 2)
    gphys = gref @ ed.inv_jt[tri].T               # (6, 2)
    dofs = p2_space(mesh).dof_map[tri]
    if u.space.kind == VECTOR_P2:
        cx, cy = _split(u.coeffs)
        return np.stack([cx[dofs] @ gphys, cy[dofs] @ gphys])
    return u.coeffs[dofs] @ gphys


def evaluate_on_bottom(u: FEFunction, mesh: Mesh, xi: float) -> float:
    """Point value of a scalar P2 field on the bottom boundary at xi."""
    tri, point = _locate_bottom(mesh, xi)
    ref = _reference_point(mesh, tri, point)
    vals = p2_values(ref[None, :])[0]
    dofs = p2_space(mesh).dof_map[tri]
    return float(u.coeffs[dofs] @ vals)


def apply_dirichlet(a: sp.spmatrix, mask: np.ndarray) -> sp.csr_matrix:
    """Symmetric elimination: zero masked rows/columns, unit diagonal."""
    keep = sp.diags((~mask).astype(float))
    return (keep @ a @ keep + sp.diags(mask.astype(float))).tocsr()


def p1_mass(mesh: Mesh) -> sp.csr_matrix:
    def build():
        ed = element_data(mesh)
        s = p1_space(mesh)
        local = np.einsum("q,qi,qj,t->tij", QUAD_WEIGHTS, _P1_VALS, _P1_VALS, ed.det)
        return _scatter(s.dof_map, s.dof_map, local, (s.n_dofs, s.n_dofs))

    return _cached(mesh, "Mp1", build)


def _scalar_laplacian_lu(mesh: Mesh):
    """Factorization of the unscaled scalar stiffness with full Dirichlet walls."""
    def build():
        mask = p2_space(mesh).dirichlet_mask()
        a = apply_dirichlet(scalar_stiffness(mesh), mask)
        try:
            return splu(a.tocsc())
        except RuntimeError as err:  # pragma: no cover - meshes are never degenerate
            raise SolverError(f"diffusion factorization failed: {err}") from err

    return _cached(mesh, "lapLU", build)


def _p1_mass_lu(mesh: Mesh):
    def build():
        try:
            return splu(p1_mass(mesh).tocsc())
        except RuntimeError as err:  # pragma: no cover
            raise SolverError(f"pressure mass factorization failed: {err}") from err

    return _cached(mesh, "Mp1LU", build)


class StokesOperator:
    """Stokes saddle solver: direct viscous solves, Schur-complement CG pressure.

    The viscous block is (1/Re) times two copies of the scalar Laplacian with
    homogeneous Dirichlet walls, so one factorization of that Laplacian is
    shared across components, right-hand sides and the heat solver.  The
    pressure solves the dense Schur complement by conjugate gradients
    preconditioned with the pressure mass matrix (spectrally equivalent, so
    the iteration count does not grow under refinement); the constant mode is
    projected out, which fixes the zero-mean pressure gauge.
    """

    rtol = 1e-13
    max_iter = 500

    def __init__(self, mesh: Mesh, re: float):
        self.mesh = mesh
        self.re = re
        sv = vector_space(mesh)
        self.mask = p2_space(mesh).dirichlet_mask()  # per component
        self.lap_lu = _scalar_laplacian_lu(mesh)
        self.mass_lu = _p1_mass_lu(mesh)
        keep = sp.diags((~sv.dirichlet_mask()).astype(float))
        self.b = (divergence_matrix(mesh) @ keep).tocsr()
        self.weights = load_p1(mesh)
        self.area = float(self.weights.sum())

    def _visc_inv(self, f: np.ndarray) -> np.ndarray:
        ns = f.size // 2
        out = np.empty_like(f)
        out[:ns] = self.lap_lu.solve(np.where(self.mask, 0.0, f[:ns]))
        out[ns:] = self.lap_lu.solve(np.where(self.mask, 0.0, f[ns:]))
        return self.re * out

    def _project(self, p: np.ndarray) -> np.ndarray:
        return p - (self.weights @ p) / self.area

    def solve(self, f_momentum: np.ndarray, p_start: np.ndarray | None = None):
        """Velocity and zero-mean pressure for a momentum right-hand side.

        ``p_start`` warm-starts the pressure iteration (fixed-point sweeps
        change the right-hand side only slightly, so the previous pressure
        cuts the iteration count drastically).
        """
        u0 = self._visc_inv(f_momentum)
        g = self._project(-(self.b @ u0))
        gnorm = np.linalg.norm(g)
        if not np.isfinite(gnorm):
            raise SolverError("non-finite momentum right-hand side")
        if gnorm == 0.0:
            return u0, np.zeros(self.b.shape[0])
        if p_start is None:
            p = np.zeros(self.b.shape[0])
            r = g.copy()
        else:
            p = self._project(p_start.copy())
            r = g - self._project(self.b @ self._visc_inv(self.b.T @ p))
        z = self._project(self.mass_lu.solve(r) / self.re)
        d = z.copy()
        rz = r @ z
        for _ in range(self.max_iter):
            if np.linalg.norm(r) <= self.rtol * gnorm:
                break
            sd = self._project(self.b @ self._visc_inv(self.b.T @ d))
            alpha = rz / (d @ sd)
            p += alpha * d
            r -= alpha * sd
            z = self._project(self.mass_lu.solve(r) / self.re)
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
        else:
            raise SolverError(
                f"pressure Schur iteration stalled at relative residual "
                f"{np.linalg.norm(r) / gnorm:.3e}"
            )
        v = u0 + self._visc_inv(self.b.T @ p)
        return v, self._project(p)


class HeatOperator:
    """Diffusion solve with homogeneous Dirichlet walls, sharing the Laplacian factor."""

    def __init__(self, mesh: Mesh, re: float, pr: float):
        self.mesh = mesh
        self.scale = re * pr
        self.mask = p2_space(mesh).dirichlet_mask()
        self.lap_lu = _scalar_laplacian_lu(mesh)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.scale * self.lap_lu.solve(np.where(self.mask, 0.0, rhs))


def stokes_operator(mesh: Mesh, re: float) -> StokesOperator:
    return _cached(mesh, ("stokes", re), lambda: StokesOperator(mesh, re))


def heat_operator(mesh: Mesh, re: float, pr: float) -> HeatOperator:
    return _cached(mesh, ("heat", re, pr), lambda: HeatOperator(mesh, re, pr))
