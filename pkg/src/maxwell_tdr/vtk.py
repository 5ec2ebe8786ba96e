"""Legacy VTK (STRUCTURED_POINTS) writer and reader for vector fields."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import RecordFormatError, RecordPathError
from .fields import Grid3, VectorGrid


def write_vtk(field, path, name="E", title="maxwell_tdr field"):
    """Write ``field`` (a VectorGrid) as ASCII legacy VTK with one VECTORS array."""
    g = field.grid
    # VTK wants x varying fastest
    pts = np.stack([field.values[c].ravel(order="F") for c in range(3)], axis=1)
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % g.n,
        "ORIGIN %.17g %.17g %.17g" % g.lo,
        "SPACING %.17g %.17g %.17g" % g.h,
        "POINT_DATA %d" % g.size,
        "VECTORS %s double" % name,
    ]
    body = "\n".join("%.17g %.17g %.17g" % tuple(p) for p in pts)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n" + body + "\n")
    return path


def read_vtk(path):
    """Read a file written by :func:`write_vtk` back into a VectorGrid."""
    path = Path(path)
    if not path.is_file():
        raise RecordPathError(path)
    lines = path.read_text().splitlines()
    head = {}
    for i, line in enumerate(lines):
        key = line.split(" ", 1)[0]
        if key in ("DIMENSIONS", "ORIGIN", "SPACING"):
            head[key] = line.split()[1:]
        if key == "VECTORS":
            start = i + 1
            break
    else:
        raise RecordFormatError(f"{path}: no VECTORS section")
    try:
        n = tuple(int(v) for v in head["DIMENSIONS"])
        lo = tuple(float(v) for v in head["ORIGIN"])
        h = tuple(float(v) for v in head["SPACING"])
        data = np.array([[float(v) for v in ln.split()] for ln in lines[start:start + int(np.prod(n))]])
    except (KeyError, ValueError) as exc:
        raise RecordFormatError(f"{path}: malformed VTK ({exc})") from None
    hi = tuple(lo[a] + h[a] * (n[a] - 1) for a in range(3))
    grid = Grid3(lo, hi, n)
    values = np.stack([data[:, c].reshape(n, order="F") for c in range(3)])
    return VectorGrid(grid, values)
