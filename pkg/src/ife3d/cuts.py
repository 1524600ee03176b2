"""Classification of mesh elements against a level-set interface.

An element is an interface element when its vertices do not all lie on
one side of the zero set.  For each interface element the crossing
points on its edges are located by bisection and a local approximating
plane is fit through three of them, chosen to minimize the largest
interior angle of the triangle they span.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .levelset import LevelSetField
from .mesh import EDGE_VERTS, FACE_EDGES, Mesh

# largest admissible interior angle of the plane-fitting triangle
MAX_TRI_ANGLE = 0.75 * np.pi
_ANGLE_SLACK = 1e-9

# resolution limits on mesh size: h < reach / H1_REACH_FACTOR and
# h * curvature <= H2_CURVATURE_LIMIT
H1_REACH_FACTOR = 3.0 * np.sqrt(3.0)
H2_CURVATURE_LIMIT = 0.0288


class HypothesisViolation(RuntimeError):
    """Mesh too coarse for the interface: an edge crossed more than
    once, a face with more than two crossed edges, or an element with
    more than six crossing points."""


class DegenerateGeometry(RuntimeError):
    pass


class CutKind(Enum):
    """Arrangement of the crossing points on an interface element."""

    TRI = "tri"                      # 3 points on the edges of one corner
    QUAD_PARALLEL = "quad-parallel"  # 4 points on 4 parallel edges
    QUAD_ADJACENT = "quad-adjacent"  # 4 points on two pairs of adjacent edges
    PENTA = "penta"                  # 5 points
    HEXA = "hexa"                    # 6 points


_KIND_BY_COUNT = {3: CutKind.TRI, 5: CutKind.PENTA, 6: CutKind.HEXA}


@dataclass
class CutPlane:
    """Approximating plane: point is the centroid of the fitted
    triangle, normal is unit and points toward Omega^+."""

    point: np.ndarray
    normal: np.ndarray
    tri: np.ndarray            # (3, 3) triangle vertices
    tri_ids: tuple[int, int, int]
    max_angle: float           # largest interior angle, radians

    def signed_dist(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.point) @ self.normal


@dataclass
class ElementCut:
    """Crossing data of one interface element."""

    element: int
    kind: CutKind
    vertex_signs: np.ndarray   # (8,) of +-1 in local vertex order
    points: np.ndarray         # (m, 3) crossing points
    local_edges: np.ndarray    # (m,) local edge index of each point
    edge_params: np.ndarray    # (m,) position along the edge in (0, 1)
    plane: CutPlane


@dataclass
class MeshCuts:
    """Classification of a whole mesh against one level-set field."""

    mesh: Mesh
    field: LevelSetField
    snap_tol: float
    node_values: np.ndarray    # level-set values at all nodes
    node_signs: np.ndarray     # (n_nodes,) of +-1, near-zero snapped to +1
    kinds: np.ndarray          # (n_elements,) -1 minus side, +1 plus side, 0 cut
    cuts: dict[int, ElementCut] = dc_field(default_factory=dict)

    @property
    def interface_elements(self) -> np.ndarray:
        return np.nonzero(self.kinds == 0)[0]

    def kind_counts(self) -> dict[str, int]:
        counts = {k.value: 0 for k in CutKind}
        for cut in self.cuts.values():
            counts[cut.kind.value] += 1
        return counts

    def scheme_faces(self) -> np.ndarray:
        """Face ids with at least one interface-element neighbor; the faces
        carrying penalty terms.  Includes domain-boundary faces of interface
        elements, which arise whenever the interface meets the boundary."""
        nx, ny, nz = self.mesh.shape
        cut3 = (self.kinds == 0).reshape(nz, ny, nx)
        masks = []
        # x-normal faces, index (k, j, i) with i in 0..nx; face i touches
        # element columns i-1 (below) and i (above) where those exist
        mx = np.zeros((nz, ny, nx + 1), dtype=bool)
        mx[:, :, :nx] |= cut3
        mx[:, :, 1:] |= cut3
        masks.append(mx)
        my = np.zeros((nz, ny + 1, nx), dtype=bool)
        my[:, :ny, :] |= cut3
        my[:, 1:, :] |= cut3
        masks.append(my)
        mz = np.zeros((nz + 1, ny, nx), dtype=bool)
        mz[:nz, :, :] |= cut3
        mz[1:, :, :] |= cut3
        masks.append(mz)
        flat = np.concatenate([m.ravel() for m in masks])
        return np.nonzero(flat)[0]


def snapped_signs(values, snap_tol: float) -> np.ndarray:
    """Side of each value: +1 unless value <= -snap_tol.  Values within
    snap_tol of zero count as the plus side so that nodes sitting on
    the interface belong to exactly one material."""
    signs = np.ones(np.shape(values), dtype=np.int8)
    signs[np.asarray(values) <= -snap_tol] = -1
    return signs


def edge_roots(field: LevelSetField, a_pts, b_pts, a_vals, b_vals,
               snap_tol: float, rel_tol: float = 1e-13, max_iter: int = 100):
    """Crossing parameter t on each segment a->b carrying a sign change.

    Each edge is first scanned at 8 interior sub-intervals; more than
    one sign change there means the interface crosses an edge twice and
    the mesh cannot resolve it.  The single bracket is then refined by
    bisection until |value| <= rel_tol * max(|value(a)|, |value(b)|).
    Returns (points, t) with t in (0, 1).
    """
    a_pts = np.atleast_2d(np.asarray(a_pts, dtype=float))
    b_pts = np.atleast_2d(np.asarray(b_pts, dtype=float))
    a_vals = np.atleast_1d(np.asarray(a_vals, dtype=float))
    b_vals = np.atleast_1d(np.asarray(b_vals, dtype=float))
    n = a_pts.shape[0]

    tsamp = np.linspace(0.0, 1.0, 9)
    samples = a_pts[:, None, :] + tsamp[None, :, None] * (b_pts - a_pts)[:, None, :]
    v = field(samples)
    v[:, 0] = a_vals
    v[:, -1] = b_vals
    s = snapped_signs(v, snap_tol)
    changes = s[:, 1:] != s[:, :-1]
    n_changes = changes.sum(axis=1)
    if np.any(n_changes > 1):
        bad = np.nonzero(n_changes > 1)[0]
        raise HypothesisViolation(
            f"{bad.size} edge(s) crossed more than once by the interface; "
            "refine the mesh")
    if np.any(n_changes == 0):
        raise ValueError("edge without sign change passed to edge_roots")

    first = np.argmax(changes, axis=1)
    t_lo = tsamp[first]
    t_hi = tsamp[first + 1]
    v_lo = v[np.arange(n), first]
    rows = np.arange(n)
    # orient brackets as (negative end, non-negative end)
    lo_neg = s[rows, first] < 0
    t_neg = np.where(lo_neg, t_lo, t_hi)
    t_pos = np.where(lo_neg, t_hi, t_lo)

    tol = rel_tol * np.maximum(np.abs(a_vals), np.abs(b_vals))
    seg = b_pts - a_pts
    t_root = 0.5 * (t_neg + t_pos)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        if not np.any(active):
            break
        mid = 0.5 * (t_neg[active] + t_pos[active])
        vm = field(a_pts[active] + mid[:, None] * seg[active])
        t_root[active] = mid
        done = np.abs(vm) <= tol[active]
        pos = vm >= 0.0
        idx = np.nonzero(active)[0]
        t_pos[idx[pos]] = mid[pos]
        t_neg[idx[~pos]] = mid[~pos]
        active[idx[done]] = False

    t_root = np.clip(t_root, 1e-12, 1.0 - 1e-12)
    return a_pts + t_root[:, None] * seg, t_root


def triangle_max_angle(p0, p1, p2) -> float:
    """Largest interior angle; degenerate triangles report pi."""
    pts = np.asarray([p0, p1, p2], dtype=float)
    worst = 0.0
    for i in range(3):
        u = pts[(i + 1) % 3] - pts[i]
        v = pts[(i + 2) % 3] - pts[i]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return np.pi
        c = np.clip(u @ v / (nu * nv), -1.0, 1.0)
        worst = max(worst, float(np.arccos(c)))
    return worst


def approximate_plane(points, field: LevelSetField, fd_step: float = 1e-6) -> CutPlane:
    """Plane through the angle-optimal triangle of crossing points.

    Among all 3-subsets of the points, the one whose largest interior
    angle is smallest is selected (ties keep the lexicographically
    first index triple).  The plane passes through the triangle
    centroid with unit normal oriented toward the positive side of the
    field.
    """
    points = np.asarray(points, dtype=float)
    m = points.shape[0]
    if m < 3:
        raise DegenerateGeometry(f"need at least 3 crossing points, got {m}")
    best_ids = None
    best_angle = np.inf
    for combo in itertools.combinations(range(m), 3):
        ang = triangle_max_angle(*points[list(combo)])
        if ang < best_angle - 1e-12:
            best_angle = ang
            best_ids = combo
    if best_ids is None or best_angle > MAX_TRI_ANGLE + _ANGLE_SLACK:
        raise DegenerateGeometry(
            f"no crossing-point triangle with max angle <= 135 deg "
            f"(best {np.degrees(best_angle):.2f} deg)")
    tri = points[list(best_ids)]
    centroid = tri.mean(axis=0)
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    nrm = np.linalg.norm(normal)
    if nrm == 0.0:
        raise DegenerateGeometry("degenerate crossing-point triangle")
    normal = normal / nrm
    side = float(field.grad(centroid, fd_step) @ normal)
    if side == 0.0:
        raise DegenerateGeometry("cannot orient plane normal: zero gradient")
    if side < 0.0:
        normal = -normal
    return CutPlane(centroid, normal, tri, best_ids, best_angle)


def _kind_of(local_edges: np.ndarray) -> CutKind:
    m = local_edges.size
    if m in _KIND_BY_COUNT:
        return _KIND_BY_COUNT[m]
    if m == 4:
        axes = local_edges // 4  # local edges are grouped 4 per axis
        if np.all(axes == axes[0]):
            return CutKind.QUAD_PARALLEL
        return CutKind.QUAD_ADJACENT
    raise HypothesisViolation(
        f"element with {m} edge crossings cannot be classified; refine the mesh")


def classify_mesh(mesh: Mesh, field: LevelSetField,
                  snap_tol: float | None = None,
                  strict: bool = True) -> MeshCuts:
    """Classify every element of the mesh against the field.

    snap_tol defaults to 1e-12 * h; node values within it are treated
    as lying on the plus side.  Raises HypothesisViolation when the
    interface crosses some edge twice, puts more than two crossed edges
    on one face, or yields more than six crossing points in an element.
    With strict=False the face condition only warns and classification
    proceeds by point count; more than six crossings stays fatal.
    """
    if snap_tol is None:
        snap_tol = 1e-12 * mesh.h
    values = field(mesh.all_node_coords())
    signs = snapped_signs(values, snap_tol)

    elem_nodes = mesh.all_element_nodes()
    elem_signs = signs[elem_nodes]
    n_minus = (elem_signs < 0).sum(axis=1)
    kinds = np.zeros(mesh.n_elements, dtype=np.int8)
    kinds[n_minus == 0] = 1
    kinds[n_minus == 8] = -1
    out = MeshCuts(mesh, field, snap_tol, values, signs, kinds)

    interface = np.nonzero(kinds == 0)[0]
    if interface.size == 0:
        return out

    edge_ids = mesh.element_edges(interface)                     # (ni, 12)
    sa = elem_signs[interface][:, EDGE_VERTS[:, 0]]
    sb = elem_signs[interface][:, EDGE_VERTS[:, 1]]
    cut_mask = sa != sb

    n_cut = cut_mask.sum(axis=1)
    if np.any(n_cut > 6):
        bad = interface[n_cut > 6]
        raise HypothesisViolation(
            f"element(s) {bad[:8].tolist()} carry more than 6 edge "
            "crossings; refine the mesh")
    face_cut = cut_mask[:, FACE_EDGES].sum(axis=2)               # (ni, 6)
    if np.any(face_cut > 2):
        bad = interface[np.any(face_cut > 2, axis=1)]
        msg = (f"face(s) of element(s) {bad[:8].tolist()} carry more than 2 "
               "crossed edges; refine the mesh")
        if strict:
            raise HypothesisViolation(msg)
        warnings.warn(msg + " (continuing: relaxed classification)",
                      RuntimeWarning, stacklevel=2)

    gids = edge_ids[cut_mask]
    uniq, inverse = np.unique(gids, return_inverse=True)
    ends = mesh.edge_endpoints_many(uniq)
    coords = mesh.node_coords(ends)
    try:
        pts, ts = edge_roots(field, coords[:, 0], coords[:, 1],
                             values[ends[:, 0]], values[ends[:, 1]], snap_tol)
    except HypothesisViolation as exc:
        raise HypothesisViolation(f"{exc} (while classifying interface elements)")

    root_idx = np.full(cut_mask.shape, -1, dtype=np.int64)
    root_idx[cut_mask] = inverse
    fd_step = 1e-6 * mesh.h
    for row, e in enumerate(interface):
        les = np.nonzero(cut_mask[row])[0]
        pidx = root_idx[row, les]
        cut_points = pts[pidx]
        plane = approximate_plane(cut_points, field, fd_step)
        out.cuts[int(e)] = ElementCut(
            element=int(e),
            kind=_kind_of(les),
            vertex_signs=elem_signs[interface[row]].copy(),
            points=cut_points,
            local_edges=les,
            edge_params=ts[pidx],
            plane=plane)
    return out


def classify_element(mesh: Mesh, field: LevelSetField, element: int,
                     snap_tol: float | None = None,
                     strict: bool = True) -> ElementCut | int:
    """Classification of a single element: an ElementCut when the
    element is crossed, else +-1 for an uncut plus/minus element."""
    if snap_tol is None:
        snap_tol = 1e-12 * mesh.h
    nodes = mesh.element_nodes(int(element))
    values = field(mesh.node_coords(nodes))
    signs = snapped_signs(values, snap_tol)
    n_minus = int((signs < 0).sum())
    if n_minus == 0:
        return 1
    if n_minus == 8:
        return -1

    sa, sb = signs[EDGE_VERTS[:, 0]], signs[EDGE_VERTS[:, 1]]
    cut_mask = sa != sb
    if cut_mask.sum() > 6:
        raise HypothesisViolation(
            f"element {element} carries more than 6 edge crossings")
    if np.any(cut_mask[FACE_EDGES].sum(axis=1) > 2):
        msg = f"a face of element {element} carries more than 2 crossed edges"
        if strict:
            raise HypothesisViolation(msg)
        warnings.warn(msg + " (continuing: relaxed classification)",
                      RuntimeWarning, stacklevel=2)
    les = np.nonzero(cut_mask)[0]
    coords = mesh.node_coords(nodes)
    a, b = EDGE_VERTS[les, 0], EDGE_VERTS[les, 1]
    pts, ts = edge_roots(field, coords[a], coords[b], values[a], values[b],
                         snap_tol)
    plane = approximate_plane(pts, field, 1e-6 * mesh.h)
    return ElementCut(int(element), _kind_of(les), signs, pts, les, ts, plane)


@dataclass
class HypothesisReport:
    """Resolution checks of a mesh/field pair.

    h1/h2 are None when the field does not carry reach or curvature
    data; h3/h4 list offending edge and face ids (empty = pass)."""

    h1_ok: bool | None
    h2_ok: bool | None
    h3_bad_edges: np.ndarray
    h4_bad_faces: np.ndarray

    @property
    def resolved(self) -> bool:
        return self.h3_bad_edges.size == 0 and self.h4_bad_faces.size == 0


def validate_hypotheses(mesh: Mesh, field: LevelSetField,
                        snap_tol: float | None = None) -> HypothesisReport:
    """Sweep every edge (8 sub-interval sign scan) and every face of the
    mesh for unresolved crossings; report, do not raise."""
    if snap_tol is None:
        snap_tol = 1e-12 * mesh.h
    h1 = None if field.reach is None or not np.isfinite(field.reach) else \
        bool(mesh.h < field.reach / H1_REACH_FACTOR)
    if field.reach is not None and np.isinf(field.reach):
        h1 = True
    h2 = None if field.curvature_bound is None else \
        bool(mesh.h * field.curvature_bound <= H2_CURVATURE_LIMIT)

    ends = mesh.edge_endpoints_many(np.arange(mesh.n_edges))
    coords = mesh.node_coords(ends)
    tsamp = np.linspace(0.0, 1.0, 9)
    # scan in chunks to bound memory on fine meshes
    n_changes = np.empty(mesh.n_edges, dtype=np.int64)
    chunk = 200_000
    for start in range(0, mesh.n_edges, chunk):
        sl = slice(start, min(start + chunk, mesh.n_edges))
        a, b = coords[sl, 0], coords[sl, 1]
        samples = a[:, None, :] + tsamp[None, :, None] * (b - a)[:, None, :]
        s = snapped_signs(field(samples), snap_tol)
        n_changes[sl] = (s[:, 1:] != s[:, :-1]).sum(axis=1)
    h3_bad = np.nonzero(n_changes > 1)[0]

    # crossed edges per face
    crossed = n_changes > 0
    h4_bad = []
    for f_axis in range(3):
        fids = _axis_face_ids(mesh, f_axis)
        fedges = _face_edge_ids(mesh, f_axis)
        bad = crossed[fedges].sum(axis=1) > 2
        h4_bad.append(fids[bad])
    return HypothesisReport(h1, h2, h3_bad, np.concatenate(h4_bad))


def _axis_face_ids(mesh: Mesh, axis: int) -> np.ndarray:
    mx, my, mz = mesh._face_dims(axis)
    ids = np.arange(mx * my * mz)
    i = ids % mx
    jk = ids // mx
    return np.asarray(mesh.face_id(axis, i, jk % my, jk // my))


def _face_edge_ids(mesh: Mesh, axis: int) -> np.ndarray:
    """(n_axis_faces, 4) global edge ids bounding each axis-normal face."""
    mx, my, mz = mesh._face_dims(axis)
    ids = np.arange(mx * my * mz)
    i = ids % mx
    jk = ids // mx
    j, k = jk % my, jk // my
    t1, t2 = [ax for ax in range(3) if ax != axis]
    ijk = np.stack([i, j, k], axis=1)
    cols = []
    for d in (0, 1):
        shifted = ijk.copy()
        shifted[:, t2] += d
        cols.append(mesh.edge_id(t1, shifted[:, 0], shifted[:, 1], shifted[:, 2]))
    for d in (0, 1):
        shifted = ijk.copy()
        shifted[:, t1] += d
        cols.append(mesh.edge_id(t2, shifted[:, 0], shifted[:, 1], shifted[:, 2]))
    return np.stack(cols, axis=1)
