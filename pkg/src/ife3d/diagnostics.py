"""Geometric quality measures of the plane approximation.

For each interface element the true interface patch is sampled and
compared against the fitted plane: how far the patch strays from the
plane, how far the true normal tilts from the plane normal, and how
much area the patch carries.  These feed the mesh-resolution checks
(the distances shrink like kappa h^2) and the per-element area bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cuts import ElementCut, MeshCuts
from .levelset import LevelSetField
from .mesh import Mesh
from .quadrature import plane_section_polygon, surface_rule


@dataclass
class PatchDiagnostics:
    max_dist: float        # max distance of sampled patch points to the plane
    min_normal_dot: float  # min of n(X) . n_plane over the samples
    patch_area: float      # quadrature-estimated area of the patch


def _degree_for_samples(n_tris: int, samples: int) -> int:
    """Smallest rule degree whose mapped point count reaches samples."""
    for degree in (4, 6, 8, 10, 12, 14):
        q = (degree + 2) // 2
        if n_tris * q * q >= samples:
            return degree
    return 14


def geometric_diagnostics(mesh: Mesh, cut: ElementCut, field: LevelSetField,
                          samples: int = 64) -> PatchDiagnostics:
    """Sample the interface patch of one cut element.

    Patch points are the plane-section quadrature points lifted onto
    the zero set plus the element's own edge crossings; at least
    `samples` lifted points are used.
    """
    lo, hi = mesh.element_box(cut.element)
    h = float(np.max(hi - lo))
    section = plane_section_polygon(lo, hi, cut.plane)
    n_tris = max(len(section) - 2, 1)
    rule = surface_rule(lo, hi, cut.plane, field,
                        degree=_degree_for_samples(n_tris, samples))
    pts = np.concatenate([rule.points, cut.points])
    dist = np.abs(cut.plane.signed_dist(pts))
    dots = field.unit_normal(pts, 1e-6 * h) @ cut.plane.normal
    return PatchDiagnostics(max_dist=float(dist.max()),
                            min_normal_dot=float(dots.min()),
                            patch_area=float(rule.weights.sum()))


@dataclass
class SweepDiagnostics:
    """Worst-case patch measures over all interface elements."""

    n_elements: int
    max_dist: float
    min_normal_dot: float
    max_patch_area: float
    total_area: float


def sweep_diagnostics(mesh: Mesh, cuts: MeshCuts,
                      samples: int = 64) -> SweepDiagnostics:
    max_dist = 0.0
    min_dot = 1.0
    max_area = 0.0
    total = 0.0
    for cut in cuts.cuts.values():
        d = geometric_diagnostics(mesh, cut, cuts.field, samples)
        max_dist = max(max_dist, d.max_dist)
        min_dot = min(min_dot, d.min_normal_dot)
        max_area = max(max_area, d.patch_area)
        total += d.patch_area
    return SweepDiagnostics(len(cuts.cuts), max_dist, min_dot,
                            max_area, total)
