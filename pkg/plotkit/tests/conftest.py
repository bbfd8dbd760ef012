import numpy as np
import pytest

TRACE_HEADER = "iter,J1,curve_energy,mean_sq,obstacle,total,phi_inf,picard_iters,wallclock_s"


@pytest.fixture
def synthetic_trace(tmp_path):
    """Small well-formed trace file with strictly decreasing J1."""
    path = tmp_path / "trace.csv"
    lines = [TRACE_HEADER]
    for k in range(12):
        j1 = 0.5 - 0.01 * k
        lines.append(
            f"{k},{j1:.17e},{1e-3 * (k + 1):.17e},{1e-9 * (k + 1):.17e},0.0,"
            f"{j1 + 0.01 * (12 - k):.17e},{1e-3 / (k + 1):.17e},5,{0.1 * k:.17e}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synthetic_curves(tmp_path):
    paths = []
    xi = np.linspace(0.0, 1.0, 17)
    for it, amp in ((0, 0.0), (100, 0.02), (200, 0.03)):
        path = tmp_path / f"curve_iter{it:06d}.txt"
        vals = amp * np.sin(np.pi * xi)
        vals[0] = vals[-1] = 0.0
        path.write_text(
            "# gamma N=16\n"
            + "".join(f"{float(x)!r} {float(v)!r}\n" for x, v in zip(xi, vals))
        )
        paths.append(path)
    return paths


def write_vtk_square(path, field_values, name="T"):
    """Unit square split into two triangles with one point-data field."""
    pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    lines = [
        "# vtk DataFile Version 2.0",
        "synthetic",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS 4 double",
        *[f"{x} {y} 0.0" for x, y in pts],
        "CELLS 2 8",
        "3 0 1 2",
        "3 0 2 3",
        "CELL_TYPES 2",
        "5",
        "5",
        "POINT_DATA 4",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
        *[str(v) for v in field_values],
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synthetic_vtk(tmp_path):
    return write_vtk_square(tmp_path / "fields.vtk", [0.0, 1.0, 2.0, 3.0])


@pytest.fixture
def constant_vtk(tmp_path):
    return write_vtk_square(tmp_path / "flat.vtk", [1.0, 1.0, 1.0, 1.0])
