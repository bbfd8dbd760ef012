"""Lagrange finite element spaces on the triangulation.

Quadratic scalar/vector spaces (nodes at vertices and edge midpoints) and
the linear pressure space, with conforming dof maps and per-tag Dirichlet
masks.  Vector dofs are component-blocked: all x-components first, then all
y-components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BOTTOM, WALL, Mesh

VECTOR_P2 = "vector_p2"
SCALAR_P2 = "scalar_p2"
SCALAR_P1 = "scalar_p1"

# degree-5 rule on the reference triangle (weights sum to its area 1/2)
_SQ15 = np.sqrt(15.0)
_A1 = (6.0 - _SQ15) / 21.0
_A2 = (6.0 + _SQ15) / 21.0
QUAD_POINTS = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0],
        [_A1, _A1], [1.0 - 2.0 * _A1, _A1], [_A1, 1.0 - 2.0 * _A1],
        [_A2, _A2], [1.0 - 2.0 * _A2, _A2], [_A2, 1.0 - 2.0 * _A2],
    ]
)
QUAD_WEIGHTS = 0.5 * np.array(
    [9.0 / 40.0]
    + [(155.0 - _SQ15) / 1200.0] * 3
    + [(155.0 + _SQ15) / 1200.0] * 3
)


def p2_values(points: np.ndarray) -> np.ndarray:
    """P2 basis values at reference points, local order (v0, v1, v2, m12, m02, m01)."""
    x, y = points[:, 0], points[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    return np.stack(
        [
            l0 * (2.0 * l0 - 1.0),
            l1 * (2.0 * l1 - 1.0),
            l2 * (2.0 * l2 - 1.0),
            4.0 * l1 * l2,
            4.0 * l0 * l2,
            4.0 * l0 * l1,
        ],
        axis=1,
    )


def p2_gradients(points: np.ndarray) -> np.ndarray:
    """Reference gradients of the P2 basis, shape (npts, 6, 2)."""
    x, y = points[:, 0], points[:, 1]
    l0 = 1.0 - x - y
    g = np.empty((points.shape[0], 6, 2))
    g[:, 0, 0] = 1.0 - 4.0 * l0
    g[:, 0, 1] = 1.0 - 4.0 * l0
    g[:, 1, 0] = 4.0 * x - 1.0
    g[:, 1, 1] = 0.0
    g[:, 2, 0] = 0.0
    g[:, 2, 1] = 4.0 * y - 1.0
    g[:, 3, 0] = 4.0 * y
    g[:, 3, 1] = 4.0 * x
    g[:, 4, 0] = -4.0 * y
    g[:, 4, 1] = 4.0 * (l0 - y)
    g[:, 5, 0] = 4.0 * (l0 - x)
    g[:, 5, 1] = -4.0 * x
    return g


def p1_values(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)


P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(eq=False)
class FunctionSpace:
    kind: str
    mesh: Mesh
    dof_map: np.ndarray       # (nt, nloc) triangle-local -> global dof
    n_dofs: int
    node_coords: np.ndarray   # geometric node per scalar dof
    dirichlet: dict           # tag -> bool mask over the dofs

    def dirichlet_mask(self, *tags) -> np.ndarray:
        """Union of the per-tag Dirichlet masks (all tags if none given)."""
        if not tags:
            tags = tuple(self.dirichlet)
        mask = np.zeros(self.n_dofs, dtype=bool)
        for tag in tags:
            mask |= self.dirichlet[tag]
        return mask


@dataclass
class FEFunction:
    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(
                f"coefficient vector has length {self.coeffs.size}, "
                f"space has {self.space.n_dofs} dofs"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")


def _edge_midpoints(mesh: Mesh):
    """Number the edges (shared edges once) and return (edge ids per triangle, edge lookup)."""
    tris = mesh.triangles
    # local edges opposite each vertex: (1,2), (0,2), (0,1)
    raw = np.stack(
        [tris[:, [1, 2]], tris[:, [0, 2]], tris[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    raw.sort(axis=1)
    uniq, inverse = np.unique(raw, axis=0, return_inverse=True)
    return inverse.reshape(-1, 3), {(int(a), int(b)): k for k, (a, b) in enumerate(uniq)}


def scalar_p2_space(mesh: Mesh) -> FunctionSpace:
    edge_ids, edge_lookup = _edge_midpoints(mesh)
    nv = mesh.n_vertices
    n_edges = len(edge_lookup)
    dof_map = np.hstack([mesh.triangles, nv + edge_ids])
    mid_coords = np.zeros((n_edges, 2))
    for (a, b), k in edge_lookup.items():
        mid_coords[k] = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
    node_coords = np.vstack([mesh.vertices, mid_coords])

    n_dofs = nv + n_edges
    dirichlet = {}
    for tag in (BOTTOM, WALL):
        mask = np.zeros(n_dofs, dtype=bool)
        for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags):
            if t == tag:
                mask[a] = mask[b] = True
                mask[nv + edge_lookup[(min(a, b), max(a, b))]] = True
        dirichlet[tag] = mask
    return FunctionSpace(SCALAR_P2, mesh, dof_map, n_dofs, node_coords, dirichlet)


def scalar_p1_space(mesh: Mesh) -> FunctionSpace:
    n_dofs = mesh.n_vertices
    dirichlet = {}
    for tag in (BOTTOM, WALL):
        mask = np.zeros(n_dofs, dtype=bool)
        sel = mesh.boundary_tags == tag
        mask[mesh.boundary_edges[sel].ravel()] = True
        dirichlet[tag] = mask
    return FunctionSpace(
        SCALAR_P1, mesh, mesh.triangles.copy(), n_dofs, mesh.vertices, dirichlet
    )


def vector_p2_space(mesh: Mesh, scalar: FunctionSpace | None = None) -> FunctionSpace:
    s = scalar if scalar is not None else scalar_p2_space(mesh)
    ns = s.n_dofs
    dof_map = np.hstack([s.dof_map, s.dof_map + ns])
    dirichlet = {tag: np.tile(m, 2) for tag, m in s.dirichlet.items()}
    return FunctionSpace(VECTOR_P2, mesh, dof_map, 2 * ns, s.node_coords, dirichlet)


def interpolate(space: FunctionSpace, f) -> FEFunction:
    """Nodal interpolant of a callable f(x1, x2) (2-vector valued on vector spaces)."""
    pts = space.node_coords
    if space.kind == VECTOR_P2:
        vals = np.array([f(x, y) for x, y in pts], dtype=float)
        return FEFunction(space, np.concatenate([vals[:, 0], vals[:, 1]]))
    vals = np.array([f(x, y) for x, y in pts], dtype=float)
    return FEFunction(space, vals)
