"""Legacy ASCII VTK output of meshes and solution fields.

Fields live on the triangulation vertices (quadratic fields are sampled at
the vertices, dropping midpoint values; a documented, standard
visualization loss).  Mesh exports add a per-triangle region tag marking
boundary-adjacent cells.
"""

from __future__ import annotations

import numpy as np

from .geometry import BOTTOM, Mesh
from .spaces import SCALAR_P1, FEFunction


def vertex_values(field: FEFunction, mesh: Mesh) -> np.ndarray:
    """Field values at the mesh vertices (P2 dofs are vertex-ordered first)."""
    nv = mesh.n_vertices
    if field.space.kind == SCALAR_P1:
        return field.coeffs
    return field.coeffs[:nv]


def vertex_magnitude(field: FEFunction, mesh: Mesh) -> np.ndarray:
    """Euclidean magnitude of a vector P2 field at the vertices."""
    ns = field.coeffs.size // 2
    vx = field.coeffs[:ns][: mesh.n_vertices]
    vy = field.coeffs[ns:][: mesh.n_vertices]
    return np.hypot(vx, vy)


def _write_header(f, mesh: Mesh, title: str) -> None:
    f.write("# vtk DataFile Version 2.0\n")
    f.write(title + "\n")
    f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    f.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.vertices:
        f.write(f"{float(x)!r} {float(y)!r} 0.0\n")
    nt = mesh.n_triangles
    f.write(f"CELLS {nt} {4 * nt}\n")
    for a, b, c in mesh.triangles:
        f.write(f"3 {a} {b} {c}\n")
    f.write(f"CELL_TYPES {nt}\n")
    f.write("\n".join(["5"] * nt) + "\n")


def write_vtk(mesh: Mesh, fields: dict, path, title: str = "shapeopt fields") -> None:
    """Write the triangulation and named per-vertex scalar arrays.

    ``fields`` maps names to arrays of vertex values (length = vertex count).
    """
    for name, arr in fields.items():
        if len(arr) != mesh.n_vertices:
            raise ValueError(
                f"field '{name}' has {len(arr)} values, mesh has {mesh.n_vertices} vertices"
            )
    try:
        with open(path, "w") as f:
            _write_header(f, mesh, title)
            if fields:
                f.write(f"POINT_DATA {mesh.n_vertices}\n")
                for name, arr in fields.items():
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        f.write(f"{float(v)!r}\n")
    except OSError as err:
        raise OSError(f"cannot write VTK file {path}: {err}") from err


def write_mesh_vtk(mesh: Mesh, path, title: str = "shapeopt mesh") -> None:
    """Write the bare triangulation with a region tag per cell.

    Tag 1 marks triangles resting on the bottom boundary, 2 the remaining
    wall-adjacent triangles, 0 the interior.
    """
    region = np.zeros(mesh.n_triangles, dtype=int)
    wall_vertices = set(
        mesh.boundary_edges[mesh.boundary_tags != BOTTOM].ravel().tolist()
    )
    for t, tri in enumerate(mesh.triangles):
        if len(set(tri.tolist()) & wall_vertices) >= 2:
            region[t] = 2
    region[mesh.bottom_tris] = 1
    try:
        with open(path, "w") as f:
            _write_header(f, mesh, title)
            f.write(f"CELL_DATA {mesh.n_triangles}\n")
            f.write("SCALARS region int 1\nLOOKUP_TABLE default\n")
            f.write("\n".join(str(r) for r in region) + "\n")
    except OSError as err:
        raise OSError(f"cannot write VTK file {path}: {err}") from err
