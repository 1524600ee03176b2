"""Readers for the solver's on-disk outputs.

This package never imports the solver; the CSV and VTK files are the
whole interface.  The expected formats are:

* ``errors.csv`` — header
  ``N,h,e_inf,e_0,e_1,e_energy,assembly_s,solve_s,interface_element_pct``,
  one row per mesh, ``nan`` for unmeasured cells.
* ``*.vtk`` — legacy ASCII ``STRUCTURED_POINTS`` with one ``double``
  scalar field under ``POINT_DATA`` (x-fastest point order).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ERRORS_HEADER = ("N,h,e_inf,e_0,e_1,e_energy,assembly_s,solve_s,"
                 "interface_element_pct")


class ReaderError(ValueError):
    """A file does not follow the documented format."""


class EmptyTableError(ReaderError):
    """A convergence table holds no measured rows."""


@dataclass(frozen=True)
class ConvergenceTable:
    """Error norms per mesh, finest-last; the log-log plotting unit.

    Rows whose error cells are all nan (reference solves) are dropped
    at parse time, so every kept row can be plotted.
    """
    source: str
    N: np.ndarray
    h: np.ndarray
    e_inf: np.ndarray
    e_0: np.ndarray
    e_1: np.ndarray
    e_energy: np.ndarray = field(default=None)

    NORMS = ("e_inf", "e_0", "e_1")

    def __post_init__(self):
        n = len(self.N)
        for name in ("h", "e_inf", "e_0", "e_1"):
            if len(getattr(self, name)) != n:
                raise ReaderError(f"{self.source}: ragged columns")
        if n == 0:
            raise EmptyTableError(f"{self.source}: no measured rows")
        if not np.all(np.diff(self.N) > 0):
            raise ReaderError(f"{self.source}: N must increase down the "
                              f"file, got {self.N.tolist()}")

    def norm(self, name: str) -> np.ndarray:
        if name not in self.NORMS:
            raise KeyError(name)
        return getattr(self, name)


def read_errors_csv(path) -> ConvergenceTable:
    """Parse one errors.csv file into a ConvergenceTable."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise EmptyTableError(f"{path}: empty file")
    if lines[0] != ERRORS_HEADER:
        raise ReaderError(f"{path}: unexpected header {lines[0]!r}; this "
                          f"reader understands only {ERRORS_HEADER!r}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 9:
            raise ReaderError(f"{path}:{i}: expected 9 columns, got "
                              f"{len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ReaderError(f"{path}:{i}: {exc}") from None
        rows.append(vals)
    if not rows:
        raise EmptyTableError(f"{path}: header but no rows")
    arr = np.asarray(rows)
    measured = ~np.all(np.isnan(arr[:, 2:5]), axis=1)
    arr = arr[measured]
    return ConvergenceTable(source=str(path), N=arr[:, 0].astype(int),
                            h=arr[:, 1], e_inf=arr[:, 2], e_0=arr[:, 3],
                            e_1=arr[:, 4], e_energy=arr[:, 5])


@dataclass(frozen=True)
class StructuredGrid:
    """A nodal scalar field on a uniform grid, from one VTK file."""
    source: str
    dims: tuple[int, int, int]          # points per axis (mx, my, mz)
    origin: np.ndarray
    spacing: np.ndarray
    name: str
    values: np.ndarray                  # shaped (mz, my, mx): z-slowest

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.dims) - 1)

    def axis_coords(self, axis: int) -> np.ndarray:
        m = self.dims[axis]
        return self.origin[axis] + self.spacing[axis] * np.arange(m)


def read_vtk(path) -> StructuredGrid:
    """Parse a legacy ASCII structured-points file with one scalar."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    body = [ln for ln in lines if ln]
    if not body or not body[0].startswith("# vtk DataFile"):
        raise ReaderError(f"{path}: not a legacy VTK data file")

    def line(idx):
        if idx >= len(body):
            raise ReaderError(f"{path}: truncated file")
        return body[idx]

    if line(2).upper() != "ASCII":
        raise ReaderError(f"{path}: only ASCII files are supported")
    if line(3).upper() != "DATASET STRUCTURED_POINTS":
        raise ReaderError(f"{path}: only STRUCTURED_POINTS is supported")

    def keyed(idx, key):
        parts = line(idx).split()
        if parts[0].upper() != key:
            raise ReaderError(f"{path}: expected {key}, got {body[idx]!r}")
        return parts[1:]

    dims = tuple(int(v) for v in keyed(4, "DIMENSIONS"))
    origin = np.array([float(v) for v in keyed(5, "ORIGIN")])
    spacing = np.array([float(v) for v in keyed(6, "SPACING")])
    n_points = int(keyed(7, "POINT_DATA")[0])
    if n_points != dims[0] * dims[1] * dims[2]:
        raise ReaderError(f"{path}: POINT_DATA {n_points} != product of "
                          f"DIMENSIONS {dims}")
    scalars = keyed(8, "SCALARS")
    name = scalars[0] if scalars else "field"
    data_start = 9
    if data_start < len(body) and \
            body[data_start].upper().startswith("LOOKUP_TABLE"):
        data_start += 1
    flat = np.array([float(v) for ln in body[data_start:]
                     for v in ln.split()])
    if flat.size != n_points:
        raise ReaderError(f"{path}: expected {n_points} values, got "
                          f"{flat.size}")
    values = flat.reshape(dims[2], dims[1], dims[0])
    return StructuredGrid(source=str(path), dims=dims, origin=origin,
                          spacing=spacing, name=name, values=values)
