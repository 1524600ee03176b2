"""Uniform Cartesian cuboid meshes with arithmetic index maps.

Nodes, elements, faces and edges are numbered lexicographically with x
fastest, then y, then z.  All connectivity is computed on the fly from
grid arithmetic; nothing except the element->node table is materialized.

Local orderings inside one cuboid element:

  vertices  v = di + 2*dj + 4*dk          (di,dj,dk in {0,1})
  edges     0..3  x-edges at (dj,dk) = (0,0),(1,0),(0,1),(1,1)
            4..7  y-edges at (di,dk)
            8..11 z-edges at (di,dj)
  faces     0..5  = -x, +x, -y, +y, -z, +z
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# local vertex pairs of the 12 edges (see module docstring for ordering)
EDGE_VERTS = np.array(
    [(0, 1), (2, 3), (4, 5), (6, 7),
     (0, 2), (1, 3), (4, 6), (5, 7),
     (0, 4), (1, 5), (2, 6), (3, 7)], dtype=np.int64)

# local vertices of the 6 faces, each quad ordered counterclockwise
# when viewed from outside the element
FACE_VERTS = np.array(
    [(0, 4, 6, 2), (1, 3, 7, 5),
     (0, 1, 5, 4), (2, 6, 7, 3),
     (0, 2, 3, 1), (4, 5, 7, 6)], dtype=np.int64)

# local edges bounding each face
FACE_EDGES = np.array(
    [(4, 6, 8, 10), (5, 7, 9, 11),
     (0, 2, 8, 9), (1, 3, 10, 11),
     (0, 1, 4, 5), (2, 3, 6, 7)], dtype=np.int64)

# offsets of the 8 vertices in {0,1}^3, vertex v = di + 2*dj + 4*dk
VERT_OFFSETS = np.array(
    [(i, j, k) for k in (0, 1) for j in (0, 1) for i in (0, 1)],
    dtype=np.int64)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box (lo, hi), lo < hi componentwise."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("BoxDomain corners must be 3-vectors")
        if not np.all(hi > lo):
            raise ValueError(f"degenerate box: lo={self.lo} hi={self.hi}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))


@dataclass
class Mesh:
    """Uniform Cartesian mesh of a BoxDomain.

    shape = (nx, ny, nz) element counts per axis; spacing may differ per
    axis but is constant along each.
    """

    domain: BoxDomain
    shape: tuple[int, int, int]
    spacing: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.shape) != 3 or any(int(n) < 1 for n in self.shape):
            raise ValueError(f"invalid element counts {self.shape}")
        self.shape = tuple(int(n) for n in self.shape)
        self.spacing = self.domain.lengths / np.asarray(self.shape)
        self._elem_nodes = None

    # -- sizes ---------------------------------------------------------

    @property
    def h(self) -> float:
        """Mesh size: the largest spacing over the three axes."""
        return float(self.spacing.max())

    @property
    def node_shape(self) -> tuple[int, int, int]:
        nx, ny, nz = self.shape
        return (nx + 1, ny + 1, nz + 1)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.shape))

    @property
    def face_counts(self) -> tuple[int, int, int]:
        nx, ny, nz = self.shape
        return ((nx + 1) * ny * nz, nx * (ny + 1) * nz, nx * ny * (nz + 1))

    @property
    def n_faces(self) -> int:
        return sum(self.face_counts)

    @property
    def edge_counts(self) -> tuple[int, int, int]:
        nx, ny, nz = self.shape
        return (nx * (ny + 1) * (nz + 1),
                (nx + 1) * ny * (nz + 1),
                (nx + 1) * (ny + 1) * nz)

    @property
    def n_edges(self) -> int:
        return sum(self.edge_counts)

    # -- nodes ---------------------------------------------------------

    def node_id(self, i, j, k):
        mx, my, _ = self.node_shape
        return np.asarray(i) + mx * (np.asarray(j) + my * np.asarray(k))

    def node_grid_index(self, ids):
        mx, my, _ = self.node_shape
        ids = np.asarray(ids)
        i = ids % mx
        jk = ids // mx
        return np.stack([i, jk % my, jk // my], axis=-1)

    def node_coords(self, ids) -> np.ndarray:
        ijk = self.node_grid_index(ids)
        return np.asarray(self.domain.lo) + ijk * self.spacing

    def all_node_coords(self) -> np.ndarray:
        return self.node_coords(np.arange(self.n_nodes))

    def boundary_node_ids(self) -> np.ndarray:
        ijk = self.node_grid_index(np.arange(self.n_nodes))
        last = np.asarray(self.node_shape) - 1
        on_bdy = np.any((ijk == 0) | (ijk == last), axis=-1)
        return np.nonzero(on_bdy)[0]

    # -- elements ------------------------------------------------------

    def element_id(self, i, j, k):
        nx, ny, _ = self.shape
        return np.asarray(i) + nx * (np.asarray(j) + ny * np.asarray(k))

    def element_grid_index(self, ids):
        nx, ny, _ = self.shape
        ids = np.asarray(ids)
        i = ids % nx
        jk = ids // nx
        return np.stack([i, jk % ny, jk // ny], axis=-1)

    def element_nodes(self, e) -> np.ndarray:
        """Node ids of element e's 8 vertices in local vertex order."""
        ijk = self.element_grid_index(e)
        corner = ijk[..., None, :] + VERT_OFFSETS
        return self.node_id(corner[..., 0], corner[..., 1], corner[..., 2])

    def all_element_nodes(self) -> np.ndarray:
        """(n_elements, 8) node table, cached."""
        if self._elem_nodes is None:
            self._elem_nodes = self.element_nodes(np.arange(self.n_elements))
        return self._elem_nodes

    def element_box(self, e) -> tuple[np.ndarray, np.ndarray]:
        ijk = self.element_grid_index(e)
        lo = np.asarray(self.domain.lo) + ijk * self.spacing
        return lo, lo + self.spacing

    def element_volume(self) -> float:
        return float(np.prod(self.spacing))

    # -- faces ---------------------------------------------------------
    # Global face ids: all x-normal faces, then y-normal, then z-normal.

    def face_axis(self, f):
        cx, cy, _ = self.face_counts
        f = np.asarray(f)
        return np.where(f < cx, 0, np.where(f < cx + cy, 1, 2))

    def _face_dims(self, axis: int) -> tuple[int, int, int]:
        nx, ny, nz = self.shape
        if axis == 0:
            return nx + 1, ny, nz
        if axis == 1:
            return nx, ny + 1, nz
        return nx, ny, nz + 1

    def face_id(self, axis: int, i, j, k):
        cx, cy, _ = self.face_counts
        off = (0, cx, cx + cy)[axis]
        mx, my, _ = self._face_dims(axis)
        return off + np.asarray(i) + mx * (np.asarray(j) + my * np.asarray(k))

    def face_grid_index(self, f, axis: int):
        cx, cy, _ = self.face_counts
        off = (0, cx, cx + cy)[axis]
        mx, my, _ = self._face_dims(axis)
        rel = np.asarray(f) - off
        i = rel % mx
        jk = rel // mx
        return np.stack([i, jk % my, jk // my], axis=-1)

    def face_neighbors(self, f: int) -> tuple[int, int]:
        """Adjacent elements (minus side, plus side) of face f.

        The face normal is the +axis direction and points from the first
        element toward the second; a missing neighbor (domain boundary)
        is reported as -1.
        """
        axis = int(self.face_axis(f))
        i, j, k = (int(v) for v in self.face_grid_index(f, axis))
        n_ax = self.shape[axis]
        ijk_minus = [i, j, k]
        ijk_minus[axis] -= 1
        e_minus = -1 if ijk_minus[axis] < 0 else int(self.element_id(*ijk_minus))
        e_plus = -1 if [i, j, k][axis] >= n_ax else int(self.element_id(i, j, k))
        return e_minus, e_plus

    def face_corner_nodes(self, f: int) -> np.ndarray:
        """Node ids of face f's 4 corners."""
        axis = int(self.face_axis(f))
        i, j, k = (int(v) for v in self.face_grid_index(f, axis))
        t1, t2 = [ax for ax in range(3) if ax != axis]
        base = [i, j, k]
        out = []
        for d2 in (0, 1):
            for d1 in (0, 1):
                c = list(base)
                c[t1] += d1
                c[t2] += d2
                out.append(int(self.node_id(*c)))
        return np.asarray(out, dtype=np.int64)

    def face_rect(self, f: int) -> tuple[int, float, np.ndarray, np.ndarray]:
        """Geometry of face f: (axis, plane coordinate, corner lo, corner hi)."""
        axis = int(self.face_axis(f))
        ijk = self.face_grid_index(f, axis)
        lo3 = np.asarray(self.domain.lo) + ijk * self.spacing
        hi3 = lo3 + self.spacing
        hi3[axis] = lo3[axis]
        return axis, float(lo3[axis]), lo3, hi3

    def element_faces(self, e: int) -> np.ndarray:
        """Global face ids of element e in local face order -x,+x,-y,+y,-z,+z."""
        i, j, k = (int(v) for v in self.element_grid_index(e))
        return np.asarray(
            [self.face_id(0, i, j, k), self.face_id(0, i + 1, j, k),
             self.face_id(1, i, j, k), self.face_id(1, i, j + 1, k),
             self.face_id(2, i, j, k), self.face_id(2, i, j, k + 1)],
            dtype=np.int64)

    def face_area(self, axis: int) -> float:
        t1, t2 = [ax for ax in range(3) if ax != axis]
        return float(self.spacing[t1] * self.spacing[t2])

    def interior_face_mask(self) -> np.ndarray:
        """Boolean mask over all faces, True where both neighbors exist."""
        mask = np.empty(self.n_faces, dtype=bool)
        pos = 0
        for axis in range(3):
            mx, my, mz = self._face_dims(axis)
            ids = np.arange(mx * my * mz)
            if axis == 0:
                along = ids % mx
            elif axis == 1:
                along = (ids // mx) % my
            else:
                along = ids // (mx * my)
            last = (mx, my, mz)[axis] - 1
            mask[pos:pos + ids.size] = (along > 0) & (along < last)
            pos += ids.size
        return mask

    # -- edges ---------------------------------------------------------
    # Global edge ids: all x-edges, then y-edges, then z-edges.

    def _edge_dims(self, axis: int) -> tuple[int, int, int]:
        nx, ny, nz = self.shape
        if axis == 0:
            return nx, ny + 1, nz + 1
        if axis == 1:
            return nx + 1, ny, nz + 1
        return nx + 1, ny + 1, nz

    def edge_id(self, axis: int, i, j, k):
        cx, cy, _ = self.edge_counts
        off = (0, cx, cx + cy)[axis]
        mx, my, _ = self._edge_dims(axis)
        return off + np.asarray(i) + mx * (np.asarray(j) + my * np.asarray(k))

    def edge_axis(self, eid):
        cx, cy, _ = self.edge_counts
        eid = np.asarray(eid)
        return np.where(eid < cx, 0, np.where(eid < cx + cy, 1, 2))

    def edge_endpoints(self, eid: int) -> tuple[int, int]:
        """Node ids of edge eid's two endpoints (lower, upper)."""
        axis = int(self.edge_axis(eid))
        cx, cy, _ = self.edge_counts
        off = (0, cx, cx + cy)[axis]
        mx, my, _ = self._edge_dims(axis)
        rel = int(eid) - off
        i, jk = rel % mx, rel // mx
        ijk = [i, jk % my, jk // my]
        a = int(self.node_id(*ijk))
        ijk[axis] += 1
        return a, int(self.node_id(*ijk))

    def element_edges(self, e) -> np.ndarray:
        """Global edge ids of elements e in local edge order (see module
        doc); scalar e gives (12,), an id array (n,) gives (n, 12)."""
        ijk = self.element_grid_index(e)
        i, j, k = ijk[..., 0], ijk[..., 1], ijk[..., 2]
        cols = []
        for dj, dk in ((0, 0), (1, 0), (0, 1), (1, 1)):
            cols.append(self.edge_id(0, i, j + dj, k + dk))
        for di, dk in ((0, 0), (1, 0), (0, 1), (1, 1)):
            cols.append(self.edge_id(1, i + di, j, k + dk))
        for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
            cols.append(self.edge_id(2, i + di, j + dj, k))
        return np.stack(cols, axis=-1).astype(np.int64)

    def edge_endpoints_many(self, eids) -> np.ndarray:
        """(n, 2) node ids of the endpoints of each edge in eids."""
        eids = np.atleast_1d(np.asarray(eids, dtype=np.int64))
        out = np.empty((eids.size, 2), dtype=np.int64)
        cx, cy, _ = self.edge_counts
        offs = (0, cx, cx + cy)
        axes = self.edge_axis(eids)
        for axis in range(3):
            sel = axes == axis
            if not np.any(sel):
                continue
            mx, my, _ = self._edge_dims(axis)
            rel = eids[sel] - offs[axis]
            i, jk = rel % mx, rel // mx
            ijk = np.stack([i, jk % my, jk // my], axis=-1)
            out[sel, 0] = self.node_id(ijk[:, 0], ijk[:, 1], ijk[:, 2])
            ijk[:, axis] += 1
            out[sel, 1] = self.node_id(ijk[:, 0], ijk[:, 1], ijk[:, 2])
        return out


def build_mesh(domain: BoxDomain, counts) -> Mesh:
    """Mesh the box with counts = (nx, ny, nz) or a single int for all axes."""
    if np.isscalar(counts):
        counts = (int(counts),) * 3
    return Mesh(domain, tuple(int(n) for n in counts))
