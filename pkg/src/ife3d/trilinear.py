"""Trilinear polynomials, the matching operator across the interface
plane, and the immersed basis on cut elements.

A shape function on a cut element is one trilinear polynomial per side
of the element's plane.  The plus-side polynomial is obtained from the
minus side by a rank-one correction that preserves the trace on the
plane and the bilinear coefficient vector while scaling the normal flux
by beta^- / beta^+; the eight nodal conditions then determine the minus
side.  Shape functions are stored in element-local coordinates on
[0,1]^3 so the solves stay equally conditioned on every mesh.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cuts import CutPlane, ElementCut, MeshCuts
from .mesh import VERT_OFFSETS, Mesh

#: exponent triples of the basis order {1, x, y, z, xy, xz, yz, xyz}
MONOMIAL_EXPONENTS = np.array([
    (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)], dtype=int)


class ConstructionError(RuntimeError):
    """The nodal system of a cut element was singular."""


def monomials(points) -> np.ndarray:
    """Rows of the eight trilinear monomials at each point, (n, 8)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    one = np.ones_like(x)
    return np.stack([one, x, y, z, x * y, x * z, y * z, x * y * z], axis=1)


def monomial_gradients(points) -> np.ndarray:
    """Gradients of the eight monomials at each point, (n, 3, 8)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    gx = np.stack([zero, one, zero, zero, y, z, zero, y * z], axis=1)
    gy = np.stack([zero, zero, one, zero, x, zero, z, x * z], axis=1)
    gz = np.stack([zero, zero, zero, one, zero, x, y, x * y], axis=1)
    return np.stack([gx, gy, gz], axis=1)


@dataclass
class Q1Poly:
    """Trilinear polynomial with coefficients in the order
    {1, x, y, z, xy, xz, yz, xyz}."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(8)

    def eval(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        vals = monomials(pts) @ self.coeffs
        return vals[0] if pts.ndim == 1 else vals

    def grad(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        g = monomial_gradients(pts) @ self.coeffs
        return g[0] if pts.ndim == 1 else g

    def d_vector(self) -> np.ndarray:
        """Coefficients of the xy, xz, yz and xyz terms."""
        return self.coeffs[4:8].copy()


def _check_unit_normal(normal) -> np.ndarray:
    n = np.asarray(normal, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("plane normal must be a unit vector")
    return n


def _check_betas(beta_minus: float, beta_plus: float) -> tuple[float, float]:
    bm, bp = float(beta_minus), float(beta_plus)
    if bm <= 0.0 or bp <= 0.0:
        raise ValueError("beta must be positive on both sides")
    return bm, bp


def _extended_coeffs(coeffs: np.ndarray, point, normal,
                     factor: float) -> np.ndarray:
    """coeffs of p + factor * (grad p(point) . normal) * ((X-point) . normal)."""
    F = np.asarray(point, dtype=float).reshape(3)
    slope = factor * float(monomial_gradients(F)[0] @ coeffs @ normal)
    out = np.array(coeffs, dtype=float)
    out[0] -= slope * (F @ normal)
    out[1:4] += slope * normal
    return out


def extension_apply(p: Q1Poly, plane: CutPlane, beta_minus: float,
                    beta_plus: float) -> Q1Poly:
    """Map a minus-side polynomial to its plus-side partner.

    The result agrees with p on the plane, keeps the same bilinear
    coefficient vector, and carries normal flux beta^- grad p(F) . n
    when weighted by beta^+.
    """
    n = _check_unit_normal(plane.normal)
    bm, bp = _check_betas(beta_minus, beta_plus)
    return Q1Poly(_extended_coeffs(p.coeffs, plane.point, n, bm / bp - 1.0))


def extension_invert(p: Q1Poly, plane: CutPlane, beta_minus: float,
                     beta_plus: float) -> Q1Poly:
    """Inverse of extension_apply (exact algebraic inverse)."""
    n = _check_unit_normal(plane.normal)
    bm, bp = _check_betas(beta_minus, beta_plus)
    return Q1Poly(_extended_coeffs(p.coeffs, plane.point, n, bp / bm - 1.0))


# -- local <-> global coordinates -----------------------------------------

_TENSOR_OF_ORDER = [4 * e[0] + 2 * e[1] + e[2] for e in MONOMIAL_EXPONENTS]


def local_to_global_coeffs(coeffs: np.ndarray, lo, spacing) -> np.ndarray:
    """Rewrite a polynomial in xi = (X - lo) / spacing in terms of X.

    Works on (..., 8) stacks of coefficient vectors.
    """
    lo = np.asarray(lo, dtype=float)
    s = np.asarray(spacing, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    lead = c.shape[:-1]
    tensor = np.zeros(lead + (8,))
    tensor[..., _TENSOR_OF_ORDER] = c
    tensor = tensor.reshape(lead + (2, 2, 2))
    # per axis: a + b*xi = (a - b*lo/s) + (b/s) X
    for ax in range(3):
        t = np.moveaxis(tensor, len(lead) + ax, -1)
        a, b = t[..., 0], t[..., 1]
        t[..., 0] = a - b * lo[ax] / s[ax]
        t[..., 1] = b / s[ax]
    tensor = tensor.reshape(lead + (8,))
    return np.ascontiguousarray(tensor[..., _TENSOR_OF_ORDER])


@lru_cache(maxsize=1)
def std_local_coeffs() -> np.ndarray:
    """Coefficients of the nodal basis on [0,1]^3, (8 shapes, 8)."""
    A = monomials(VERT_OFFSETS.astype(float))
    return np.linalg.solve(A, np.eye(8)).T


# -- immersed basis --------------------------------------------------------

@dataclass
class IFEBasis:
    """Nodal shape functions of one cut element.

    coeffs_minus / coeffs_plus hold the local-coordinate coefficients,
    one row per shape function; side_minus / side_plus expose them as
    global-coordinate polynomials with side_plus[i] the exact image of
    side_minus[i] under the matching operator.
    """

    element: int
    plane: CutPlane
    betas: tuple[float, float]
    lo: np.ndarray
    spacing: np.ndarray
    coeffs_minus: np.ndarray   # (8, 8)
    coeffs_plus: np.ndarray    # (8, 8)
    vertex_signs: np.ndarray   # (8,)

    def _local(self, points) -> np.ndarray:
        return (np.atleast_2d(np.asarray(points, dtype=float))
                - self.lo) / self.spacing

    def eval_all(self, points, side: int) -> np.ndarray:
        """Values of all 8 shapes at the points, (n, 8)."""
        c = self.coeffs_minus if side < 0 else self.coeffs_plus
        return monomials(self._local(points)) @ c.T

    def grad_all(self, points, side: int) -> np.ndarray:
        """Gradients of all 8 shapes at the points, (n, 3, 8)."""
        c = self.coeffs_minus if side < 0 else self.coeffs_plus
        g = monomial_gradients(self._local(points)) @ c.T
        return g / self.spacing[None, :, None]

    @property
    def side_minus(self) -> list[Q1Poly]:
        glob = local_to_global_coeffs(self.coeffs_minus, self.lo, self.spacing)
        return [Q1Poly(row) for row in glob]

    @property
    def side_plus(self) -> list[Q1Poly]:
        bm, bp = self.betas
        return [extension_apply(p, self.plane, bm, bp)
                for p in self.side_minus]


class IFEBasisSet:
    """Immersed bases of every interface element, built in one batch."""

    def __init__(self, mesh: Mesh, cuts: MeshCuts, beta_minus: float,
                 beta_plus: float, cond_limit: float = 1e12):
        bm, bp = _check_betas(beta_minus, beta_plus)
        self.mesh = mesh
        self.betas = (bm, bp)
        self.elements = np.array(sorted(cuts.cuts.keys()), dtype=np.int64)
        m = len(self.elements)
        s = mesh.spacing
        self.spacing = s
        self.lo = np.empty((m, 3))
        F = np.empty((m, 3))
        normals = np.empty((m, 3))
        signs = np.empty((m, 8), dtype=np.int8)
        self._planes = []
        for row, elem in enumerate(self.elements):
            cut = cuts.cuts[int(elem)]
            self.lo[row] = mesh.element_box(int(elem))[0]
            F[row] = cut.plane.point
            normals[row] = cut.plane.normal
            signs[row] = cut.vertex_signs
            self._planes.append(cut.plane)
        self.vertex_signs = signs

        lam = bm / bp - 1.0
        F_loc = (F - self.lo) / s
        a = normals / s            # local direction of the normal derivative
        b = normals * s            # local direction of the plane offset
        self.F_loc, self.a, self.b = F_loc, a, b

        M_vert = monomials(VERT_OFFSETS.astype(float))        # (8, 8)
        G = np.einsum("mjk,mj->mk", monomial_gradients(F_loc), a)  # (m, 8)
        w = lam * (VERT_OFFSETS[None] - F_loc[:, None]) @ b[..., None]
        w = w[..., 0] * (signs > 0)                            # (m, 8)
        A = M_vert[None] + w[:, :, None] * G[:, None, :]
        if m:
            conds = np.linalg.cond(A)
            worst = float(conds.max())
            if not np.all(np.isfinite(conds)):
                bad = self.elements[~np.isfinite(conds)]
                raise ConstructionError(
                    f"singular nodal system on element(s) {bad.tolist()}")
            if worst > cond_limit:
                warnings.warn(
                    f"nodal system condition number {worst:.3e} exceeds "
                    f"{cond_limit:.1e}", RuntimeWarning, stacklevel=2)
            try:
                sol = np.linalg.solve(A, np.broadcast_to(np.eye(8), A.shape))
            except np.linalg.LinAlgError as exc:
                raise ConstructionError(
                    "singular nodal system in immersed basis build") from exc
            self.coeffs_minus = sol.transpose(0, 2, 1)         # (m, 8, 8)
        else:
            self.coeffs_minus = np.zeros((0, 8, 8))
            G = np.zeros((0, 8))
        slope = lam * np.einsum("mik,mk->mi", self.coeffs_minus, G)
        shift = np.concatenate([-(F_loc * b).sum(1, keepdims=True), b], axis=1)
        self.coeffs_plus = self.coeffs_minus.copy()
        self.coeffs_plus[:, :, 0:4] += slope[:, :, None] * shift[:, None, :]
        self._row_of = {int(e): i for i, e in enumerate(self.elements)}

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, element: int) -> bool:
        return int(element) in self._row_of

    def row(self, element: int) -> int:
        return self._row_of[int(element)]

    def basis(self, element: int) -> IFEBasis:
        i = self.row(element)
        return IFEBasis(element=int(element), plane=self._planes[i],
                        betas=self.betas, lo=self.lo[i], spacing=self.spacing,
                        coeffs_minus=self.coeffs_minus[i],
                        coeffs_plus=self.coeffs_plus[i],
                        vertex_signs=self.vertex_signs[i])


def build_ife_basis(mesh: Mesh, cut: ElementCut, beta_minus: float,
                    beta_plus: float) -> IFEBasis:
    """Immersed basis of a single cut element."""

    class _One:
        cuts = {cut.element: cut}

    return IFEBasisSet(mesh, _One(), beta_minus, beta_plus).basis(cut.element)


def standard_basis(mesh: Mesh, element: int) -> list[Q1Poly]:
    """Nodal trilinear basis of an uncut element, in global coordinates."""
    lo, hi = mesh.element_box(element)
    glob = local_to_global_coeffs(std_local_coeffs(), lo, hi - lo)
    return [Q1Poly(row) for row in glob]


def standard_eval_all(mesh: Mesh, elements, points) -> np.ndarray:
    """Values of the 8 nodal shapes of each element at one point each.

    elements (n,), points (n, 3) -> (n, 8); vectorized across elements.
    """
    lo = np.stack([mesh.element_box(int(e))[0] for e in np.atleast_1d(elements)])
    xi = (np.atleast_2d(points) - lo) / mesh.spacing
    return monomials(xi) @ std_local_coeffs().T


def standard_grad_all(mesh: Mesh, elements, points) -> np.ndarray:
    """Gradients of the 8 nodal shapes of each element at one point each.

    elements (n,), points (n, 3) -> (n, 3, 8); vectorized across elements.
    """
    lo = np.stack([mesh.element_box(int(e))[0] for e in np.atleast_1d(elements)])
    xi = (np.atleast_2d(points) - lo) / mesh.spacing
    local = monomial_gradients(xi) @ std_local_coeffs().T
    return local / mesh.spacing[None, :, None]


def interpolate(u_minus, u_plus, mesh: Mesh, cuts: MeshCuts) -> np.ndarray:
    """Nodal coefficient vector of the interpolant: the value of u at
    each mesh node, side chosen by the sign of the level set there."""
    coords = mesh.all_node_coords()
    out = np.empty(mesh.n_nodes)
    minus = cuts.node_signs < 0
    if np.any(minus):
        out[minus] = np.asarray(u_minus(coords[minus]), dtype=float)
    if np.any(~minus):
        out[~minus] = np.asarray(u_plus(coords[~minus]), dtype=float)
    return out
