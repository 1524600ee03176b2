import numpy as np

from ife3d.mesh import BoxDomain, EDGE_VERTS, FACE_EDGES, FACE_VERTS, build_mesh


def unit_mesh(n):
    return build_mesh(BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), n)


def test_counts_against_closed_forms():
    mesh = build_mesh(BoxDomain((0, 0, 0), (2, 3, 4)), (2, 3, 4))
    nx, ny, nz = 2, 3, 4
    assert mesh.n_nodes == (nx + 1) * (ny + 1) * (nz + 1)
    assert mesh.n_elements == nx * ny * nz
    assert mesh.n_faces == (nx + 1) * ny * nz + nx * (ny + 1) * nz + nx * ny * (nz + 1)
    assert mesh.n_edges == nx * (ny + 1) * (nz + 1) + (nx + 1) * ny * (nz + 1) + (nx + 1) * (ny + 1) * nz
    assert np.allclose(mesh.spacing, [1.0, 1.0, 1.0])
    assert mesh.h == 1.0


def test_node_ordering_x_fastest():
    mesh = unit_mesh(2)
    # node 0 at origin, node 1 one step in x, node 3 one step in y
    assert np.allclose(mesh.node_coords(0), [0, 0, 0])
    assert np.allclose(mesh.node_coords(1), [0.5, 0, 0])
    assert np.allclose(mesh.node_coords(3), [0, 0.5, 0])
    assert np.allclose(mesh.node_coords(9), [0, 0, 0.5])
    ids = np.arange(mesh.n_nodes)
    assert np.array_equal(mesh.node_id(*mesh.node_grid_index(ids).T), ids)


def test_boundary_node_count():
    for n in (2, 3, 5):
        mesh = unit_mesh(n)
        expect = (n + 1) ** 3 - (n - 1) ** 3
        assert mesh.boundary_node_ids().size == expect
        # boundary nodes touch the box
        xyz = mesh.node_coords(mesh.boundary_node_ids())
        on_face = (np.isclose(xyz, 0.0) | np.isclose(xyz, 1.0)).any(axis=1)
        assert on_face.all()


def test_element_volume_additivity():
    mesh = build_mesh(BoxDomain((-1, 0, 2), (1, 3, 2.5)), (4, 3, 2))
    total = mesh.n_elements * mesh.element_volume()
    assert np.isclose(total, mesh.domain.volume, rtol=1e-15)


def test_element_nodes_match_box_corners():
    mesh = build_mesh(BoxDomain((-1, -1, -1), (1, 1, 1)), (3, 4, 5))
    rng = np.random.default_rng(0)
    for e in rng.integers(0, mesh.n_elements, size=10):
        lo, hi = mesh.element_box(int(e))
        corners = mesh.node_coords(mesh.element_nodes(int(e)))
        # local vertex v = di + 2*dj + 4*dk
        for v in range(8):
            di, dj, dk = v & 1, (v >> 1) & 1, (v >> 2) & 1
            expect = [lo[0] + di * mesh.spacing[0],
                      lo[1] + dj * mesh.spacing[1],
                      lo[2] + dk * mesh.spacing[2]]
            assert np.allclose(corners[v], expect)
        assert np.allclose(hi, corners[7])


def test_single_element_mesh_faces_are_boundary():
    mesh = unit_mesh(1)
    assert mesh.n_faces == 6
    for f in range(6):
        nbrs = mesh.face_neighbors(f)
        assert 0 in nbrs and -1 in nbrs


def test_interior_face_count_2x2x2():
    mesh = unit_mesh(2)
    mask = mesh.interior_face_mask()
    assert mask.sum() == 12
    # cross-check against pairwise neighbor existence
    brute = sum(1 for f in range(mesh.n_faces) if -1 not in mesh.face_neighbors(f))
    assert brute == 12


def test_face_neighbors_orientation_and_symmetry():
    mesh = build_mesh(BoxDomain((0, 0, 0), (1, 1, 1)), (3, 2, 4))
    for f in np.nonzero(mesh.interior_face_mask())[0][::7]:
        f = int(f)
        axis = int(mesh.face_axis(f))
        e1, e2 = mesh.face_neighbors(f)
        c1 = mesh.element_box(e1)[0]
        c2 = mesh.element_box(e2)[0]
        step = c2 - c1
        assert np.isclose(step[axis], mesh.spacing[axis])
        assert np.allclose(np.delete(step, axis), 0.0)
        assert f in mesh.element_faces(e1)
        assert f in mesh.element_faces(e2)
        # face corners are shared by both neighbor elements
        fc = set(mesh.face_corner_nodes(f).tolist())
        assert fc <= set(mesh.element_nodes(e1).tolist())
        assert fc <= set(mesh.element_nodes(e2).tolist())


def test_face_rect_matches_corner_nodes():
    mesh = build_mesh(BoxDomain((0, 0, 0), (2, 1, 1)), (4, 3, 2))
    for f in (0, 17, mesh.n_faces - 1):
        axis, coord, lo, hi = mesh.face_rect(f)
        pts = mesh.node_coords(mesh.face_corner_nodes(f))
        assert np.allclose(pts[:, axis], coord)
        assert np.allclose(pts.min(axis=0), lo)
        assert np.allclose(pts.max(axis=0), hi)


def test_element_edges_consistent_with_local_table():
    mesh = build_mesh(BoxDomain((0, 0, 0), (1, 1, 1)), (3, 3, 3))
    rng = np.random.default_rng(1)
    for e in rng.integers(0, mesh.n_elements, size=8):
        nodes = mesh.element_nodes(int(e))
        for le, eid in enumerate(mesh.element_edges(int(e))):
            a, b = mesh.edge_endpoints(int(eid))
            va, vb = EDGE_VERTS[le]
            assert {a, b} == {nodes[va], nodes[vb]}


def test_face_tables_consistent():
    # each face's 4 edges connect exactly its 4 vertices
    for lf in range(6):
        verts = set(FACE_VERTS[lf].tolist())
        edge_verts = set()
        for le in FACE_EDGES[lf]:
            edge_verts.update(EDGE_VERTS[le].tolist())
        assert edge_verts == verts


def test_edge_axis_and_lengths():
    mesh = build_mesh(BoxDomain((0, 0, 0), (1, 2, 3)), (2, 2, 2))
    counts = mesh.edge_counts
    for eid in (0, counts[0], counts[0] + counts[1], mesh.n_edges - 1):
        axis = int(mesh.edge_axis(eid))
        a, b = mesh.edge_endpoints(eid)
        d = mesh.node_coords(b) - mesh.node_coords(a)
        assert np.isclose(d[axis], mesh.spacing[axis])
        assert np.allclose(np.delete(d, axis), 0.0)
