"""Portable plain-text grid files for debug dumps of material maps and modes.

Format: first line "nx ny dx", then optional "# key=value ..." header lines,
then nx*ny rows of values in row-major order ("re im" for complex data,
a single column for real data). Floats carry 17 significant digits so the
round trip is lossless.
"""
from __future__ import annotations

import numpy as np

from .fdfd import EigenMode

_FMT = "%.17g"


def write_grid(path, array: np.ndarray, dx: float, header: dict | None = None):
    array = np.asarray(array)
    nx, ny = array.shape
    lines = [f"{nx} {ny} {_FMT % dx}"]
    if header:
        pairs = " ".join(f"{k}={_FMT % v}" for k, v in header.items())
        lines.append(f"# {pairs}")
    flat = array.ravel()
    if np.iscomplexobj(array):
        lines.extend(f"{_FMT % v.real} {_FMT % v.imag}" for v in flat)
    else:
        lines.extend(_FMT % v for v in flat.astype(float))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid(path):
    """Returns (array, dx, header_dict); complex array iff two value columns."""
    with open(path) as fh:
        first = fh.readline().split()
        nx, ny, dx = int(first[0]), int(first[1]), float(first[2])
        header = {}
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            for pair in line[1:].split():
                key, _, val = pair.partition("=")
                header[key] = float(val)
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        rows = [ln.split() for ln in fh if ln.strip()]
    if len(rows) != nx * ny:
        raise ValueError(f"expected {nx * ny} values, found {len(rows)}")
    if len(rows[0]) == 2:
        data = np.array([[float(a), float(b)] for a, b in rows])
        arr = (data[:, 0] + 1j * data[:, 1]).reshape(nx, ny)
    else:
        arr = np.array([float(r[0]) for r in rows]).reshape(nx, ny)
    return arr, dx, header


def write_mode(path, mode: EigenMode):
    """Dump a mode field with its complex frequency and residual in the header."""
    _dims, dx = mode.grid_ref
    write_grid(path, mode.field, dx, header={
        "omega_re": mode.omega.real,
        "omega_im": mode.omega.imag,
        "residual": mode.residual,
    })
