"""Quadrature over cuboids, plane-cut cuboid pieces, faces and the
interface patch itself.

Cut elements are integrated on the two convex pieces produced by the
element's approximating plane: each piece is clipped, fan
tetrahedralized from its centroid, and a conical-product rule (all
weights positive, exact to the requested total degree) is mapped to
every tetrahedron.  Faces crossed by neighbor planes are partitioned
into convex polygons so integrands stay smooth on every sub-cell.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .cuts import CutPlane, DegenerateGeometry


@dataclass
class QuadRule:
    points: np.ndarray   # (n, 3)
    weights: np.ndarray  # (n,)

    @property
    def n(self) -> int:
        return self.weights.size

    def integrate(self, f) -> float:
        return float(self.weights @ np.asarray(f(self.points), dtype=float))


class SamplingError(RuntimeError):
    pass


# -- reference rules ----------------------------------------------------

def _points_for_degree(degree: int) -> int:
    return (int(degree) + 2) // 2  # 2q-1 >= degree


@lru_cache(maxsize=None)
def segment_rule_01(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on [0,1], exact to degree 2q-1."""
    x, w = roots_legendre(q)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi_rule_01(q: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for integral of g(t)*(1-t)^alpha over [0,1]."""
    if alpha == 0:
        return segment_rule_01(q)
    x, w = roots_jacobi(q, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def tet_rule(degree: int = 4) -> QuadRule:
    """Conical-product rule on the unit simplex x,y,z>=0, x+y+z<=1.

    Exact for all polynomials of the given total degree; weights
    positive and summing to 1/6.
    """
    q = _points_for_degree(degree)
    u, wu = _jacobi_rule_01(q, 2)
    v, wv = _jacobi_rule_01(q, 1)
    w, ww = _jacobi_rule_01(q, 0)
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    x = U
    y = (1.0 - U) * V
    z = (1.0 - U) * (1.0 - V) * W
    wt = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :])
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return QuadRule(pts, wt.ravel())


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Conical-product rule on the unit triangle x,y>=0, x+y<=1 in 2D
    barycentric-style coordinates; weights sum to 1/2."""
    q = _points_for_degree(degree)
    u, wu = _jacobi_rule_01(q, 1)
    v, wv = _jacobi_rule_01(q, 0)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([U.ravel(), ((1.0 - U) * V).ravel()], axis=1)
    return pts, (wu[:, None] * wv[None, :]).ravel()


def cuboid_rule(lo, hi, order: int = 3) -> QuadRule:
    """Tensor Gauss-Legendre rule on the box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, w = segment_rule_01(order)
    axes = [lo[ax] + (hi[ax] - lo[ax]) * x for ax in range(3)]
    wts = [(hi[ax] - lo[ax]) * w for ax in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    W = wts[0][:, None, None] * wts[1][None, :, None] * wts[2][None, None, :]
    return QuadRule(np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1),
                    W.ravel())


def map_rule_to_tets(tets: np.ndarray, degree: int = 4) -> QuadRule:
    """Map the reference tet rule onto each tetrahedron in (m, 4, 3)."""
    ref = tet_rule(degree)
    tets = np.asarray(tets, dtype=float).reshape(-1, 4, 3)
    v0 = tets[:, 0]
    J = tets[:, 1:] - v0[:, None, :]           # (m, 3, 3) rows are edges
    dets = np.abs(np.linalg.det(J))
    pts = v0[:, None, :] + ref.points[None] @ J  # (m, nref, 3)
    wts = dets[:, None] * ref.weights[None]
    return QuadRule(pts.reshape(-1, 3), wts.ravel())


def map_rule_to_tris(tris: np.ndarray, degree: int = 4) -> QuadRule:
    """Map the reference triangle rule onto 3D triangles (m, 3, 3);
    weights carry the physical areas."""
    ref_pts, ref_w = triangle_rule(degree)
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    area2 = np.linalg.norm(np.cross(e1, e2), axis=1)  # 2 * area
    pts = (v0[:, None, :] + ref_pts[:, 0][None, :, None] * e1[:, None, :]
           + ref_pts[:, 1][None, :, None] * e2[:, None, :])
    wts = area2[:, None] * ref_w[None]
    return QuadRule(pts.reshape(-1, 3), wts.ravel())


# -- plane-cut tessellation ---------------------------------------------

def _clip_polygon(poly: np.ndarray, dists: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon against dists <= 0."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp, dq = dists[i], dists[(i + 1) % m]
        if dp <= 0.0:
            out.append(p)
        if (dp < 0.0 < dq) or (dq < 0.0 < dp):
            out.append(p + dp / (dp - dq) * (q - p))
    return np.asarray(out, dtype=float).reshape(-1, poly.shape[1])


def _dedupe_ring(poly: np.ndarray, tol: float) -> np.ndarray:
    if len(poly) == 0:
        return poly
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > tol:
            keep.append(i)
    if len(keep) > 1 and np.linalg.norm(poly[keep[-1]] - poly[keep[0]]) <= tol:
        keep.pop()
    return poly[keep]


_BOX_CORNERS = np.array([(i, j, k) for k in (0, 1) for j in (0, 1) for i in (0, 1)],
                        dtype=float)
# quads of the 6 box faces in corner-index space, consistent winding
_BOX_FACES = [(0, 4, 6, 2), (1, 3, 7, 5), (0, 1, 5, 4),
              (2, 6, 7, 3), (0, 2, 3, 1), (4, 5, 7, 6)]
_BOX_EDGES = [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7),
              (0, 4), (1, 5), (2, 6), (3, 7)]


def plane_section_polygon(lo, hi, plane: CutPlane, tol: float | None = None) -> np.ndarray:
    """Polygon of the plane clipped to the box, ordered around its
    centroid; empty (0, 3) when the plane misses the box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = lo + _BOX_CORNERS * (hi - lo)
    d = plane.signed_dist(corners)
    pts = []
    for a, b in _BOX_EDGES:
        da, db = d[a], d[b]
        if (da < 0.0 <= db) or (db < 0.0 <= da):
            t = da / (da - db)
            pts.append(corners[a] + t * (corners[b] - corners[a]))
    if not pts:
        return np.zeros((0, 3))
    pts = np.asarray(pts)
    if tol is None:
        tol = 1e-12 * float(np.max(hi - lo))
    # order by angle in the plane
    c = pts.mean(axis=0)
    u = pts[0] - c
    nu = np.linalg.norm(u)
    if nu == 0.0 or len(pts) < 3:
        return np.zeros((0, 3))
    u = u / nu
    v = np.cross(plane.normal, u)
    rel = pts - c
    ang = np.arctan2(rel @ v, rel @ u)
    pts = pts[np.argsort(ang)]
    pts = _dedupe_ring(pts, tol)
    return pts if len(pts) >= 3 else np.zeros((0, 3))


def _fan_tets(apex: np.ndarray, polys: list[np.ndarray], vol_tol: float) -> np.ndarray:
    tets = []
    for poly in polys:
        for i in range(1, len(poly) - 1):
            tet = np.array([apex, poly[0], poly[i], poly[i + 1]])
            vol = abs(np.linalg.det(tet[1:] - tet[0])) / 6.0
            if vol > vol_tol:
                tets.append(tet)
    if not tets:
        return np.zeros((0, 4, 3))
    return np.asarray(tets)


@dataclass
class CutCells:
    """Plane-cut tessellation of one cuboid: tetrahedra covering the
    minus and plus pieces and the section polygon separating them."""

    minus_tets: np.ndarray   # (m, 4, 3)
    plus_tets: np.ndarray    # (p, 4, 3)
    section: np.ndarray      # (k, 3) polygon on the plane
    volume_minus: float
    volume_plus: float


def box_tets(lo, hi) -> np.ndarray:
    """Six-tet split of a box (all sharing the main diagonal)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = lo + _BOX_CORNERS * (hi - lo)
    # walks 0 -> 7 along axis permutations
    walks = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7),
             (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]
    return corners[np.asarray(walks)]


def tet_volumes(tets: np.ndarray) -> np.ndarray:
    tets = np.asarray(tets, dtype=float).reshape(-1, 4, 3)
    if tets.shape[0] == 0:
        return np.zeros(0)
    return np.abs(np.linalg.det(tets[:, 1:] - tets[:, :1])) / 6.0


def tessellate_cut(lo, hi, plane: CutPlane,
                   sliver_tol: float | None = None) -> CutCells:
    """Split the box into tetrahedra on each side of the plane.

    A side whose volume falls below sliver_tol (default 1e-14 * h^3) is
    merged into the dominant side with a warning.  The two volumes add
    up to the box volume to relative round-off.

    A plane that only grazes the box -- touching a face, edge, or
    corner without passing through the interior -- yields the whole box
    on the side holding the corners and an empty other side.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    h = float(np.max(hi - lo))
    if sliver_tol is None:
        sliver_tol = 1e-14 * h ** 3
    tol = 1e-12 * h
    box_vol = float(np.prod(hi - lo))

    corners = lo + _BOX_CORNERS * (hi - lo)
    d = plane.signed_dist(corners)
    strictly_pos = bool(np.any(d > tol))
    strictly_neg = bool(np.any(d < -tol))
    if not (strictly_pos and strictly_neg):
        # No interior section.  The generic clipping below must not run
        # here: a plane coincident with a box face would show up both as
        # the section polygon and as an unclipped face, double-counting
        # a cone of volume.
        if np.any(np.abs(d) <= tol):
            warnings.warn("plane cuts off a sliver below tolerance; merged "
                          "into the dominant side", RuntimeWarning,
                          stacklevel=2)
        if strictly_pos:
            return CutCells(np.zeros((0, 4, 3)), box_tets(lo, hi),
                            np.zeros((0, 3)), 0.0, box_vol)
        return CutCells(box_tets(lo, hi), np.zeros((0, 4, 3)),
                        np.zeros((0, 3)), box_vol, 0.0)
    section = plane_section_polygon(lo, hi, plane, tol)

    pieces = []
    for sgn in (1.0, -1.0):  # keep sgn * d <= 0: minus piece first
        polys = [] if section.size == 0 else [section]
        verts = [] if section.size == 0 else [section]
        for quad in _BOX_FACES:
            poly = corners[list(quad)]
            clipped = _clip_polygon(poly, sgn * d[list(quad)])
            clipped = _dedupe_ring(clipped, tol)
            if len(clipped) >= 3:
                polys.append(clipped)
                verts.append(clipped)
        if not verts:
            pieces.append((np.zeros((0, 4, 3)), 0.0))
            continue
        apex = np.concatenate(verts).mean(axis=0)
        tets = _fan_tets(apex, polys, vol_tol=1e-16 * h ** 3)
        pieces.append((tets, float(tet_volumes(tets).sum())))

    (minus_tets, vol_minus), (plus_tets, vol_plus) = pieces
    if abs(vol_minus + vol_plus - box_vol) > 1e-10 * box_vol:
        raise DegenerateGeometry(
            f"tessellation lost volume: {vol_minus} + {vol_plus} != {box_vol}")

    for sgn in (-1.0, 1.0):
        small = vol_minus if sgn < 0 else vol_plus
        if 0.0 < small < sliver_tol:
            warnings.warn("plane cuts off a sliver below tolerance; merged "
                          "into the dominant side", RuntimeWarning, stacklevel=2)
    if vol_minus < sliver_tol:
        return CutCells(np.zeros((0, 4, 3)), box_tets(lo, hi),
                        np.zeros((0, 3)), 0.0, box_vol)
    if vol_plus < sliver_tol:
        return CutCells(box_tets(lo, hi), np.zeros((0, 4, 3)),
                        np.zeros((0, 3)), box_vol, 0.0)
    return CutCells(minus_tets, plus_tets, section, vol_minus, vol_plus)


def volume_rule(cells: CutCells, side: int, degree: int = 4) -> QuadRule:
    """Quadrature over the minus (side=-1) or plus (side=+1) piece."""
    tets = cells.minus_tets if side < 0 else cells.plus_tets
    if tets.shape[0] == 0:
        return QuadRule(np.zeros((0, 3)), np.zeros(0))
    return map_rule_to_tets(tets, degree)


# -- face partition -----------------------------------------------------

@dataclass
class FaceRule:
    """Quadrature on a mesh face partitioned by the neighbor planes.

    side_left[i] / side_right[i] tell on which side of the left/right
    neighbor's plane (or uncut side) point i lies."""

    points: np.ndarray
    weights: np.ndarray
    side_left: np.ndarray
    side_right: np.ndarray


def face_rule(rect: tuple[int, float, np.ndarray, np.ndarray],
              left: CutPlane | int, right: CutPlane | int,
              degree: int = 4) -> FaceRule:
    """Partition the face rectangle by the traces of the neighbor
    planes and lay a triangle rule on each region.

    rect is (axis, coordinate, lo corner, hi corner) as produced by
    Mesh.face_rect; left/right are the neighbor planes, or a fixed
    sign +-1 for uncut neighbors.
    """
    axis, coord, lo3, hi3 = rect
    t1, t2 = [ax for ax in range(3) if ax != axis]
    scale = max(hi3[t1] - lo3[t1], hi3[t2] - lo3[t2])
    corners = np.array([
        [lo3[t1], lo3[t2]], [hi3[t1], lo3[t2]],
        [hi3[t1], hi3[t2]], [lo3[t1], hi3[t2]]])

    def embed(p2):
        out = np.empty(p2.shape[:-1] + (3,))
        out[..., axis] = coord
        out[..., t1] = p2[..., 0]
        out[..., t2] = p2[..., 1]
        return out

    def trace_dist(plane: CutPlane, p2):
        return plane.signed_dist(embed(p2))

    regions = [corners]
    for nbr in (left, right):
        if not isinstance(nbr, CutPlane):
            continue
        nxt = []
        for poly in regions:
            d = trace_dist(nbr, poly)
            if np.max(np.abs(d)) <= 1e-12 * scale:
                # The plane contains the face, so its trace does not
                # partition it; clipping with all-zero distances would
                # keep the full polygon on both sides.  Points on the
                # plane see value- and normal-flux-continuous bases, so
                # the side label is immaterial here.
                nxt.append(poly)
                continue
            for sgn in (1.0, -1.0):
                clipped = _dedupe_ring(_clip_polygon(poly, sgn * d), 1e-12 * scale)
                if len(clipped) >= 3:
                    nxt.append(clipped)
        regions = nxt

    pts_all, w_all, sl_all, sr_all = [], [], [], []
    for poly in regions:
        tris2 = np.stack([np.repeat(poly[None, 0], len(poly) - 2, axis=0),
                          poly[1:-1], poly[2:]], axis=1)
        rule = map_rule_to_tris(embed(tris2), degree)
        if rule.n == 0:
            continue
        centroid = poly.mean(axis=0)
        sides = []
        for nbr in (left, right):
            if isinstance(nbr, CutPlane):
                sides.append(1 if trace_dist(nbr, centroid) >= 0.0 else -1)
            else:
                sides.append(int(nbr))
        pts_all.append(rule.points)
        w_all.append(rule.weights)
        sl_all.append(np.full(rule.n, sides[0], dtype=np.int8))
        sr_all.append(np.full(rule.n, sides[1], dtype=np.int8))
    if not pts_all:
        return FaceRule(np.zeros((0, 3)), np.zeros(0),
                        np.zeros(0, np.int8), np.zeros(0, np.int8))
    return FaceRule(np.concatenate(pts_all), np.concatenate(w_all),
                    np.concatenate(sl_all), np.concatenate(sr_all))


# -- interface patch ----------------------------------------------------

def lift_to_interface(points, field, normal, h: float,
                      max_span: float = 4.0) -> np.ndarray:
    """Project plane points onto the zero set along the plane normal by
    a bracketed, vectorized bisection; raises SamplingError when no
    bracket is found within max_span * h."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if n == 0:
        return pts

    def g(s):
        return field(pts + s[:, None] * normal)

    a = np.full(n, 0.05 * h)
    glo, ghi = g(-a), g(a)
    need = glo * ghi > 0.0
    while np.any(need):
        a[need] *= 2.0
        if np.max(a[need]) > max_span * h:
            raise SamplingError(
                "no interface crossing along the plane normal within "
                f"{max_span} h of a section point")
        glo[need] = g(-a)[need]
        ghi[need] = g(a)[need]
        need = glo * ghi > 0.0

    # endpoints oriented so field(s_neg) <= 0 <= field(s_pos)
    s_neg = np.where(glo <= 0.0, -a, a)
    s_pos = np.where(glo <= 0.0, a, -a)
    tol = 1e-14 * h
    for _ in range(100):
        if np.max(np.abs(s_pos - s_neg)) <= tol:
            break
        mid = 0.5 * (s_neg + s_pos)
        neg = g(mid) <= 0.0
        s_neg = np.where(neg, mid, s_neg)
        s_pos = np.where(neg, s_pos, mid)
    s = 0.5 * (s_neg + s_pos)
    return pts + s[:, None] * normal


def surface_rule(lo, hi, plane: CutPlane, field, degree: int = 4,
                 fd_step: float | None = None) -> QuadRule:
    """Quadrature on the interface patch inside the box.

    Plane-section quadrature points are lifted onto the zero set along
    the plane normal; weights pick up the co-area factor
    1/(n(X) . n_plane) so they integrate over the curved patch.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    h = float(np.max(hi - lo))
    if fd_step is None:
        fd_step = 1e-6 * h
    section = plane_section_polygon(lo, hi, plane)
    if section.size == 0:
        return QuadRule(np.zeros((0, 3)), np.zeros(0))
    tris = np.stack([np.repeat(section[None, 0], len(section) - 2, axis=0),
                     section[1:-1], section[2:]], axis=1)
    flat = map_rule_to_tris(tris, degree)
    lifted = lift_to_interface(flat.points, field, plane.normal, h)
    n_gamma = field.unit_normal(lifted, fd_step)
    cosine = n_gamma @ plane.normal
    if np.any(cosine <= 0.0):
        raise SamplingError("interface normal turns away from the plane "
                            "normal inside one element")
    return QuadRule(lifted, flat.weights / cosine)
