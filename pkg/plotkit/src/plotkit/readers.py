"""Readers for the solver's output files: trace CSV, curve text, legacy VTK.

Deliberately self-contained; rendering must work from files alone, with the
solver absent.
"""

from __future__ import annotations

import numpy as np

TRACE_COLUMNS = (
    "iter", "J1", "curve_energy", "mean_sq", "obstacle", "total",
    "phi_inf", "picard_iters", "wallclock_s",
)


class FormatError(Exception):
    """An input file does not match the expected schema."""


def read_trace(path) -> dict:
    """Trace CSV as a dict of named column arrays."""
    with open(path) as f:
        header = f.readline().strip()
        if header != ",".join(TRACE_COLUMNS):
            raise FormatError(f"{path}: unexpected trace header {header!r}")
        rows = []
        for lineno, line in enumerate(f, 2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise FormatError(f"{path}: row {lineno} has {len(parts)} columns")
            try:
                rows.append([float(x) for x in parts])
            except ValueError as err:
                raise FormatError(f"{path}: row {lineno}: {err}") from err
    if not rows:
        raise FormatError(f"{path}: no data rows")
    data = np.array(rows)
    return {name: data[:, k] for k, name in enumerate(TRACE_COLUMNS)}


def read_curve(path):
    """Curve file -> (abscissae, heights, iteration label or None)."""
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("# gamma N="):
            raise FormatError(f"{path}: not a curve file")
        pairs = [line.split() for line in f if line.strip()]
    xi = np.array([float(p[0]) for p in pairs])
    vals = np.array([float(p[1]) for p in pairs])
    return xi, vals


def read_vtk(path) -> dict:
    """Legacy ASCII VTK triangulation with point data.

    Returns keys ``points`` (n, 2), ``triangles`` (m, 3) and ``fields``
    (name -> per-point array).
    """
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise FormatError(f"{path}: not a legacy VTK file")

    def find(prefix, start=0):
        for k in range(start, len(lines)):
            if lines[k].startswith(prefix):
                return k
        raise FormatError(f"{path}: missing {prefix} section")

    kp = find("POINTS")
    n_pts = int(lines[kp].split()[1])
    points = np.array(
        [[float(x) for x in lines[kp + 1 + i].split()[:2]] for i in range(n_pts)]
    )

    kc = find("CELLS")
    n_cells = int(lines[kc].split()[1])
    tris = []
    for i in range(n_cells):
        parts = lines[kc + 1 + i].split()
        if parts[0] == "3":
            tris.append([int(v) for v in parts[1:4]])
    triangles = np.array(tris, dtype=int)

    fields = {}
    k = 0
    try:
        kd = find("POINT_DATA")
    except FormatError:
        kd = None
    if kd is not None:
        k = kd
        while True:
            try:
                ks = find("SCALARS", k + 1)
            except FormatError:
                break
            name = lines[ks].split()[1]
            start = ks + 2  # skip LOOKUP_TABLE
            fields[name] = np.array([float(lines[start + i]) for i in range(n_pts)])
            k = start + n_pts - 1
    return {"points": points, "triangles": triangles, "fields": fields}
