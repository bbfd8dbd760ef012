"""Bottom-curve representation and boundary-fitted triangulation.

The container is the unit square whose bottom boundary is replaced by the
graph of a height function on [0, 1], discretized by nodal values on a
uniform grid.  Meshes are built by vertically shearing a structured
crisscross grid so that the bottom row of vertices follows the curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOTTOM = 1
WALL = 2


class GeometryError(Exception):
    """Raised when a curve or mesh would be geometrically degenerate."""


@dataclass(frozen=True)
class BoundaryCurve:
    """Piecewise-linear bottom curve: heights at the nodes i/N, i = 0..N.

    The endpoints are clamped to zero and every height must stay strictly
    below 1 so the domain cannot degenerate.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise GeometryError("curve needs at least two nodal values")
        if not np.all(np.isfinite(vals)):
            raise GeometryError("curve values must be finite")
        if vals[0] != 0.0 or vals[-1] != 0.0:
            raise GeometryError("curve endpoints must be exactly zero")
        if np.any(vals >= 1.0):
            k = int(np.argmax(vals >= 1.0))
            raise GeometryError(
                f"curve height {vals[k]} at xi={k / (vals.size - 1)} reaches the top wall"
            )
        object.__setattr__(self, "values", vals)

    @property
    def n_intervals(self) -> int:
        return self.values.size - 1

    @property
    def grid(self) -> np.ndarray:
        """Curve node abscissae i/N."""
        n = self.n_intervals
        return np.arange(n + 1) / n

    @classmethod
    def flat(cls, n: int) -> "BoundaryCurve":
        return cls(np.zeros(n + 1))

    @classmethod
    def from_callable(cls, f, n: int) -> "BoundaryCurve":
        """Sample a height function on the uniform grid, pinning the endpoints."""
        xi = np.arange(n + 1) / n
        vals = np.asarray([f(x) for x in xi], dtype=float)
        vals[0] = 0.0
        vals[-1] = 0.0
        return cls(vals)


def curve_eval(curve: BoundaryCurve, xi):
    """Evaluate the piecewise-linear curve and its slope.

    At interior nodes the slope of the interval to the *left* is returned;
    at xi = 0 the first interval is used.  Accepts scalars or arrays.

    Returns
    -------
    (value, slope) : floats or arrays matching the shape of ``xi``
    """
    x = np.asarray(xi, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("curve abscissa outside [0, 1]")
    n = curve.n_intervals
    idx = np.clip(np.ceil(x * n).astype(int) - 1, 0, n - 1)
    t = x * n - idx
    left = curve.values[idx]
    right = curve.values[idx + 1]
    val = left * (1.0 - t) + right * t
    slope = (right - left) * n
    if np.isscalar(xi):
        return float(val), float(slope)
    return val, slope


def curve_second_difference(curve: BoundaryCurve) -> np.ndarray:
    """Three-point second difference of the nodal heights, zero at the endpoints.

    Exact for quadratics; the endpoints never move so their entries are
    irrelevant to the descent and set to 0.
    """
    v = curve.values
    n = curve.n_intervals
    if n < 2:
        raise ValueError("second difference needs at least two intervals")
    out = np.zeros_like(v)
    out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) * n * n
    return out


def curve_integrals(curve: BoundaryCurve):
    """Trapezoid mean and piecewise-constant-slope Dirichlet energy.

    Returns
    -------
    (mean, dirichlet_energy) : tuple of floats
        mean = trapezoid rule of the heights; dirichlet_energy is the exact
        integral of the squared slope of the piecewise-linear interpolant.
    """
    v = curve.values
    n = curve.n_intervals
    mean = float(np.trapezoid(v, dx=1.0 / n))
    slopes = np.diff(v) * n
    energy = float(np.sum(slopes * slopes) / n)
    return mean, energy


def obstacle_penalty_integral(curve: BoundaryCurve, nu: float) -> float:
    """Trapezoid rule of the squared plus-part of (height - (1 - nu))."""
    excess = np.maximum(curve.values - (1.0 - nu), 0.0)
    return float(np.trapezoid(excess * excess, dx=1.0 / curve.n_intervals))


def bottom_normal(curve: BoundaryCurve, xi):
    """Outward unit normal of the bottom boundary at abscissa ``xi``.

    Points downward out of the fluid: (slope, -1) normalized.  Scalar or
    array input.  The piecewise-linear curve has a slope kink at its nodes;
    queries landing exactly on an interior node use the centered slope (the
    average of the two one-sided limits), which keeps the normal field of a
    symmetric curve symmetric.  Elsewhere the containing-interval slope
    applies; the endpoints take their one-sided limits.
    """
    x = np.atleast_1d(np.asarray(xi, dtype=float))
    _, slope = curve_eval(curve, x)
    n = curve.n_intervals
    v = curve.values
    pos = x * n
    nearest = np.rint(pos)
    interior = (np.abs(pos - nearest) <= 1e-12 * n) & (nearest > 0) & (nearest < n)
    if np.any(interior):
        idx = nearest[interior].astype(int)
        slope = slope.copy()
        slope[interior] = (v[idx + 1] - v[idx - 1]) * n / 2.0
    scale = 1.0 / np.sqrt(1.0 + slope * slope)
    normals = np.stack([slope * scale, -scale], axis=-1)
    return normals[0] if np.isscalar(xi) else normals


@dataclass(eq=False)
class Mesh:
    """Boundary-fitted crisscross triangulation of the container.

    ``cells_per_side`` square cells span each direction; every cell is split
    into four triangles by its centroid.  ``boundary_edges`` run
    counter-clockwise around the domain (bottom, right, top, left) and carry
    a BOTTOM or WALL tag.  ``bottom_tris`` gives, for each bottom edge, the
    unique adjacent triangle.
    """

    vertices: np.ndarray        # (nv, 2)
    triangles: np.ndarray       # (nt, 3) CCW
    boundary_edges: np.ndarray  # (ne, 2) vertex pairs
    boundary_tags: np.ndarray   # (ne,) BOTTOM or WALL
    bottom_trace: np.ndarray    # ordered bottom vertex ids, left to right
    bottom_xi: np.ndarray       # abscissae of the bottom vertices
    bottom_tris: np.ndarray     # (n_bottom_edges,) adjacent triangle per edge
    cells_per_side: int = field(default=0)
    # per-mesh assembly cache (spaces, jacobians, operators, factorizations)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _cells_per_side(h: float) -> int:
    return int(np.ceil(1.0 / h - 1e-9))


def build_mesh(curve: BoundaryCurve, h: float) -> Mesh:
    """Shear a structured crisscross grid onto the curved-bottom container.

    A uniform m x m grid of the unit square (m = ceil(1/h)) is mapped
    vertically so column heights interpolate between the curve and the top
    wall; each cell is split into four triangles by its centroid, which keeps
    the triangulation symmetric under left-right reflection whenever the
    curve is.
    """
    if not 0.0 < h <= 0.5:
        raise ValueError("mesh size must lie in (0, 0.5]")
    m = _cells_per_side(h)
    xi = np.arange(m + 1) / m
    heights, _ = curve_eval(curve, xi)
    if np.any(1.0 - heights < 1e-9):
        k = int(np.argmax(1.0 - heights < 1e-9))
        raise GeometryError(f"degenerate column: curve reaches the top wall near xi={xi[k]}")

    # grid vertices: row j at fraction t = j/m between curve and top wall
    t = (np.arange(m + 1) / m)[:, None]              # (m+1, 1) rows
    x1 = np.broadcast_to(xi[None, :], (m + 1, m + 1))
    x2 = heights[None, :] * (1.0 - t) + t            # exact endpoints at t=0, 1
    grid = np.stack([x1.ravel(), x2.ravel()], axis=1)

    def vid(i, j):
        return j * (m + 1) + i

    # cell centroids appended after the grid vertices; cell (i, j) flattens to j*m + i
    jj, ii = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    quads = np.stack(
        [vid(ii, jj), vid(ii + 1, jj), vid(ii + 1, jj + 1), vid(ii, jj + 1)], axis=-1
    ).reshape(-1, 4)  # CCW corners
    centroids = grid[quads].mean(axis=1)
    vertices = np.vstack([grid, centroids])

    ncell = m * m
    centroid_id = (m + 1) ** 2 + np.arange(ncell)
    tris = np.empty((4 * ncell, 3), dtype=np.int64)
    for k in range(4):
        tris[k::4, 0] = quads[:, k]
        tris[k::4, 1] = quads[:, (k + 1) % 4]
        tris[k::4, 2] = centroid_id

    # boundary loop: bottom (left->right), right (up), top (right->left), left (down)
    bot = np.stack([vid(np.arange(m), 0), vid(np.arange(m) + 1, 0)], axis=1)
    right = np.stack([vid(m, np.arange(m)), vid(m, np.arange(m) + 1)], axis=1)
    top = np.stack([vid(m - np.arange(m), m), vid(m - 1 - np.arange(m), m)], axis=1)
    left = np.stack([vid(0, m - np.arange(m)), vid(0, m - 1 - np.arange(m))], axis=1)
    boundary_edges = np.vstack([bot, right, top, left])
    boundary_tags = np.concatenate(
        [np.full(m, BOTTOM), np.full(3 * m, WALL)]
    ).astype(np.int64)

    # the first triangle of bottom cell i is the one resting on bottom edge i
    bottom_tris = 4 * np.arange(m)

    return Mesh(
        vertices=vertices,
        triangles=tris,
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
        bottom_trace=vid(np.arange(m + 1), 0),
        bottom_xi=xi,
        bottom_tris=bottom_tris,
        cells_per_side=m,
    )


def read_curve(path) -> BoundaryCurve:
    """Read a curve file: '# gamma N=<n>' header then one 'xi value' pair per line."""
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("# gamma N="):
            raise ValueError(f"not a curve file (bad header): {path}")
        n = int(header.split("=", 1)[1])
        rows = [line.split() for line in f if line.strip()]
    if len(rows) != n + 1:
        raise ValueError(f"curve file {path} has {len(rows)} rows, expected {n + 1}")
    vals = np.array([float(r[1]) for r in rows])
    return BoundaryCurve(vals)


def write_curve(curve: BoundaryCurve, path) -> None:
    with open(path, "w") as f:
        f.write(f"# gamma N={curve.n_intervals}\n")
        for x, v in zip(curve.grid, curve.values):
            f.write(f"{float(x)!r} {float(v)!r}\n")
