"""Axis-aligned slice heatmaps of a nodal VTK field."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .convergence import save_deterministic
from .readers import StructuredGrid, read_vtk

AXES = {"x": 0, "y": 1, "z": 2}


class DomainError(ValueError):
    """A requested slice coordinate lies outside the grid."""


@dataclass(frozen=True)
class SlicePlot:
    """What one plot-slices invocation produced."""
    files: tuple[str, ...]
    axis: str
    coords: tuple[float, ...]
    vmin: float
    vmax: float


def extract_slice(grid: StructuredGrid, axis: str, coord: float) -> np.ndarray:
    """The field on the plane {axis = coord}, linearly interpolated
    between the two neighbouring node planes.

    Rows/columns of the result follow the remaining two axes in x,y,z
    order (e.g. an axis='y' slice is indexed [z, x])."""
    try:
        k = AXES[axis]
    except KeyError:
        raise DomainError(f"axis must be one of x, y, z; got {axis!r}") \
            from None
    lo = float(grid.origin[k])
    hi = float(grid.upper[k])
    if not (lo <= coord <= hi):
        raise DomainError(f"{axis}={coord:g} outside [{lo:g}, {hi:g}]")
    pos = (coord - lo) / float(grid.spacing[k])
    i0 = min(int(np.floor(pos)), grid.dims[k] - 2)
    t = pos - i0
    vals_axis = 2 - k                   # values are shaped (z, y, x)
    v0 = np.take(grid.values, i0, axis=vals_axis)
    v1 = np.take(grid.values, i0 + 1, axis=vals_axis)
    return (1.0 - t) * v0 + t * v1


def _plane_axes(axis: str) -> tuple[int, int]:
    """In-plane (horizontal, vertical) spatial axes of a slice."""
    others = [k for k in range(3) if k != AXES[axis]]
    return others[0], others[1]


def plot_slices(vtk_path, axis: str, coords, *, out_dir=".", stem="slice",
                fmt="png", cmap="viridis",
                style_seed: int = 0) -> SlicePlot:
    """One heatmap per coordinate, all sharing a single color scale."""
    grid = read_vtk(vtk_path)
    coords = [float(c) for c in coords]
    if not coords:
        raise DomainError("no slice coordinates given")
    planes = [extract_slice(grid, axis, c) for c in coords]
    vmin = min(float(p.min()) for p in planes)
    vmax = max(float(p.max()) for p in planes)
    if vmax - vmin < 1e-300:            # constant field: keep imshow sane
        pad = max(1e-12, abs(vmax) * 1e-9)
        vmin, vmax = vmin - pad, vmax + pad
    plt.rcParams["svg.hashsalt"] = str(style_seed)

    ha, va = _plane_axes(axis)
    extent = (float(grid.origin[ha]), float(grid.upper[ha]),
              float(grid.origin[va]), float(grid.upper[va]))
    names = "xyz"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for coord, plane in zip(coords, planes):
        # extract_slice keeps (z,y,x) ordering minus the sliced axis,
        # which is exactly (vertical, horizontal) for every axis choice
        img = plane
        fig, ax = plt.subplots(figsize=(5.2, 4.4), dpi=140)
        im = ax.imshow(img, origin="lower", extent=extent, vmin=vmin,
                       vmax=vmax, cmap=cmap, interpolation="nearest",
                       aspect="equal")
        ax.set_xlabel(names[ha])
        ax.set_ylabel(names[va])
        ax.set_title(f"{grid.name} at {axis} = {coord:g}")
        fig.colorbar(im, ax=ax, shrink=0.9)
        fig.tight_layout()
        target = out / f"{stem}_{axis}{coord:+.2f}.{fmt}"
        save_deterministic(fig, target)
        plt.close(fig)
        files.append(str(target))
    return SlicePlot(files=tuple(files), axis=axis, coords=tuple(coords),
                     vmin=vmin, vmax=vmax)
