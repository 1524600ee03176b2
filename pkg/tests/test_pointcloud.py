"""Point-cloud ingestion: parsing, signed distance, sign flood fill,
nodal-field interpolation, and the quality of the reconstructed zero
set against the analytic surface the synthetic cloud samples."""
import numpy as np
import pytest

from ife3d.cuts import classify_mesh
from ife3d.mesh import BoxDomain, build_mesh
from ife3d.pointcloud import (CloudFormatError, DegenerateCloudError,
                              NodalLevelSet, PointCloud, cloud_resolution,
                              fibonacci_sphere_cloud, load_cloud,
                              signed_distance)

CENTER = np.array([0.5, 0.5, 0.5])
RADIUS = 0.3


@pytest.fixture(scope="module")
def sphere_cloud():
    return fibonacci_sphere_cloud(5000)


@pytest.fixture(scope="module")
def unit_mesh():
    return build_mesh(BoxDomain((0, 0, 0), (1, 1, 1)), (16, 16, 16))


@pytest.fixture(scope="module")
def sphere_nls(sphere_cloud, unit_mesh):
    return signed_distance(sphere_cloud, unit_mesh)


# -- parsing -----------------------------------------------------------

def test_load_cloud_minimal(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("0 0 0\n1 0 0\n0 1 0\n0 0 1")
    cloud = load_cloud(p)
    assert len(cloud) == 4
    assert np.allclose(cloud.points[3], [0, 0, 1])


def test_load_cloud_commas_comments_blanks(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("# header\n0.1, 0.2, 0.3\n\n1 2 3  # trailing\n4,5 6\n7 8 9\n")
    cloud = load_cloud(p)
    assert len(cloud) == 4
    assert np.allclose(cloud.points[1], [1, 2, 3])
    assert np.allclose(cloud.points[2], [4, 5, 6])


def test_load_cloud_bad_token_reports_line(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("a b c\n")
    with pytest.raises(CloudFormatError, match=":1:"):
        load_cloud(p)


def test_load_cloud_wrong_arity_reports_line(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("0 0 0\n1 2\n")
    with pytest.raises(CloudFormatError, match=":2:"):
        load_cloud(p)


def test_load_cloud_too_few_points(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("0 0 0\n1 1 1\n2 2 2\n")
    with pytest.raises(CloudFormatError, match="at least 4"):
        load_cloud(p)


def test_pointcloud_type_validation():
    with pytest.raises(CloudFormatError):
        PointCloud(np.zeros((3, 3)))
    with pytest.raises(CloudFormatError):
        PointCloud(np.array([[0.0, 0.0, np.inf]] * 5))


# -- synthetic generator ----------------------------------------------

def test_fibonacci_cloud_lies_on_sphere(sphere_cloud):
    assert len(sphere_cloud) == 5000
    r = np.linalg.norm(sphere_cloud.points - CENTER, axis=1)
    assert np.max(np.abs(r - RADIUS)) < 1e-12
    # near-uniform: resolution close to the ideal equal-area spacing
    delta = cloud_resolution(sphere_cloud)
    ideal = np.sqrt(4.0 * np.pi * RADIUS**2 / 5000)
    assert 0.5 * ideal < delta < 2.0 * ideal


# -- signed distance ---------------------------------------------------

def test_signed_distance_values(sphere_cloud, unit_mesh, sphere_nls):
    delta = cloud_resolution(sphere_cloud)
    center_val = float(sphere_nls(CENTER))
    assert abs(center_val + RADIUS) <= delta
    corner = np.zeros(3)
    exact = np.linalg.norm(corner - CENTER) - RADIUS
    assert abs(float(sphere_nls(corner)) - exact) <= delta
    # sign split: interior negative, boundary positive
    assert np.all(sphere_nls.values[unit_mesh.boundary_node_ids()] > 0)
    assert np.any(sphere_nls.values < 0)


def test_node_on_cloud_point_gets_zero(sphere_cloud):
    mesh = build_mesh(BoxDomain((0, 0, 0), (1, 1, 1)), (10, 10, 10))
    pts = np.vstack([sphere_cloud.points, [[0.5, 0.5, 0.2]]])
    nls = signed_distance(PointCloud(pts), mesh)
    node = mesh.node_id(5, 5, 2)
    assert abs(nls.values[node]) == 0.0


def test_cloud_near_boundary_rejected(unit_mesh):
    pts = fibonacci_sphere_cloud(100, radius=0.49).points
    with pytest.raises(ValueError, match="one cell"):
        signed_distance(PointCloud(pts), unit_mesh)


def test_degenerate_cloud_detected(unit_mesh):
    # a tight cluster strictly inside one cell separates nothing: every
    # node stays clear of it and the flood reaches the whole grid
    base = CENTER + np.array([0.013, 0.017, 0.011])
    pts = base + 1e-3 * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0],
                                  [0, 0, 1.0]])
    with pytest.raises(DegenerateCloudError):
        signed_distance(PointCloud(pts), unit_mesh)


# -- nodal field as a level set ---------------------------------------

def test_nodal_field_exact_at_nodes(sphere_nls, unit_mesh):
    ids = np.arange(0, unit_mesh.n_nodes, 97)
    got = sphere_nls(unit_mesh.node_coords(ids))
    assert np.array_equal(got, sphere_nls.values[ids])


def test_nodal_field_is_trilinear_in_cells(unit_mesh):
    rng = np.random.default_rng(3)
    vals = rng.normal(size=unit_mesh.n_nodes)
    nls = NodalLevelSet(unit_mesh, vals)
    pts = rng.uniform(0.01, 0.99, (50, 3))
    # independent trilinear oracle from the 8 corner values
    lo = np.asarray(unit_mesh.domain.lo)
    cell = np.floor((pts - lo) / unit_mesh.spacing).astype(int)
    expect = np.empty(len(pts))
    for n, (p, c) in enumerate(zip(pts, cell)):
        t = (p - (lo + c * unit_mesh.spacing)) / unit_mesh.spacing
        acc = 0.0
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    node = unit_mesh.node_id(c[0] + di, c[1] + dj, c[2] + dk)
                    w = ((t[0] if di else 1 - t[0])
                         * (t[1] if dj else 1 - t[1])
                         * (t[2] if dk else 1 - t[2]))
                    acc += w * vals[node]
        expect[n] = acc
    assert np.allclose(nls(pts), expect, rtol=0, atol=1e-14)


def test_nodal_field_gradient_matches_fd(sphere_nls):
    rng = np.random.default_rng(4)
    pts = rng.uniform(0.28, 0.67, (30, 3))
    g = sphere_nls.grad(pts)
    fd = np.empty_like(g)
    for ax in range(3):
        d = np.zeros(3)
        d[ax] = 1e-7
        fd[:, ax] = (sphere_nls(pts + d) - sphere_nls(pts - d)) / 2e-7
    assert np.max(np.abs(g - fd)) < 1e-6


def test_nodal_field_length_validated(unit_mesh):
    with pytest.raises(ValueError):
        NodalLevelSet(unit_mesh, np.zeros(7))


def test_to_csv_roundtrip(tmp_path, unit_mesh):
    rng = np.random.default_rng(5)
    nls = NodalLevelSet(unit_mesh, rng.normal(size=unit_mesh.n_nodes))
    path = tmp_path / "field.csv"
    nls.to_csv(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert len(rows) == unit_mesh.n_nodes
    ids = unit_mesh.node_id(rows[:, 0].astype(int), rows[:, 1].astype(int),
                            rows[:, 2].astype(int))
    assert np.array_equal(rows[:, 3], nls.values[ids])


# -- zero-set quality --------------------------------------------------

def _edge_roots(mesh, values):
    """Interface points from sign changes along mesh edges; the nodal
    field is linear on edges, so the linear root is exact."""
    sh = mesh.node_shape
    V = values.reshape(sh[2], sh[1], sh[0])
    X = mesh.all_node_coords().reshape(sh[2], sh[1], sh[0], 3)
    pts = []
    for axis in range(3):
        ax_v = 2 - axis  # V is [k, j, i]
        a = np.swapaxes(V, 0, ax_v) if ax_v != 0 else V
        xs = np.swapaxes(X, 0, ax_v) if ax_v != 0 else X
        lo, hi = a[:-1], a[1:]
        cross = lo * hi < 0
        t = lo[cross] / (lo[cross] - hi[cross])
        pts.append(xs[:-1][cross] + t[:, None] * (xs[1:][cross]
                                                  - xs[:-1][cross]))
    return np.concatenate(pts)


def test_zero_set_matches_analytic_sphere(sphere_cloud, unit_mesh,
                                          sphere_nls):
    delta = cloud_resolution(sphere_cloud)
    roots = _edge_roots(unit_mesh, sphere_nls.values)
    assert len(roots) > 100
    dev = np.abs(np.linalg.norm(roots - CENTER, axis=1) - RADIUS)
    assert np.max(dev) <= max(delta, unit_mesh.h)


def test_zero_set_deviation_shrinks_under_refinement(sphere_cloud):
    from scipy.spatial import cKDTree
    tree = cKDTree(sphere_cloud.points)
    delta = cloud_resolution(sphere_cloud)
    devs = []
    for n in (16, 32):
        mesh = build_mesh(BoxDomain((0, 0, 0), (1, 1, 1)), (n, n, n))
        nls = signed_distance(sphere_cloud, mesh)
        roots = _edge_roots(mesh, nls.values)
        dev = tree.query(roots)[0].max()
        assert dev <= max(delta, mesh.h)
        devs.append(dev)
    assert devs[1] <= devs[0]


def test_classification_accepts_nodal_field(sphere_nls, unit_mesh):
    cuts = classify_mesh(unit_mesh, sphere_nls, strict=True)
    assert len(cuts.cuts) > 300
    # enclosed region is a fraction of the box
    frac = (np.asarray(sphere_nls.values) < 0).mean()
    assert 0.02 < frac < 0.2
