import numpy as np

from ife3d.levelset import (LevelSetField, orthocircle_field,
                            orthocircle_laplacian, plane_field, sphere_field)


def central_diff(field, pts, step):
    out = np.empty(pts.shape)
    for ax in range(3):
        d = np.zeros(3)
        d[ax] = step
        out[..., ax] = (field(pts + d) - field(pts - d)) / (2 * step)
    return out


def test_plane_field_values_and_gradient():
    f = plane_field((1, 0, 1), np.pi / 10 / np.sqrt(2))
    # zero set is x + z = pi/10
    pts = np.array([[np.pi / 10, 0.0, 0.0], [0.0, 0.3, np.pi / 10]])
    assert np.allclose(f(pts), 0.0, atol=1e-15)
    assert np.isclose(f([1.0, 0.0, 0.0]), (1 - np.pi / 10) / np.sqrt(2))
    g = f.grad(np.zeros((4, 3)))
    assert np.allclose(g, np.array([1, 0, 1]) / np.sqrt(2))
    assert f.curvature_bound == 0.0 and np.isinf(f.reach)


def test_sphere_field_values_and_gradient():
    r = np.pi / 4
    f = sphere_field((0, 0, 0), r)
    assert np.isclose(f([r, 0, 0]), 0.0)
    assert f([0, 0, 0]) < 0 < f([1, 1, 1])
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (20, 3))
    assert np.allclose(f.grad(pts), 2 * pts)
    assert np.isclose(f.curvature_bound, 1 / r)


def test_orthocircle_gradient_matches_central_differences():
    f = orthocircle_field()
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1.2, 1.2, (50, 3))
    g = f.grad(pts)
    g_fd = central_diff(f, pts, 1e-6)
    assert np.allclose(g, g_fd, rtol=1e-5, atol=1e-7)


def test_orthocircle_laplacian_matches_central_differences():
    f = orthocircle_field()
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.0, 1.0, (30, 3))
    lap = orthocircle_laplacian(pts)
    step = 1e-4
    acc = np.zeros(len(pts))
    for ax in range(3):
        d = np.zeros(3)
        d[ax] = step
        acc += (f(pts + d) - 2 * f(pts) + f(pts - d)) / step**2
    assert np.allclose(lap, acc, rtol=1e-5, atol=1e-4)


def test_fd_gradient_fallback():
    # field without analytic gradient
    f = LevelSetField(lambda p: p[..., 0] ** 2 + np.sin(p[..., 1]) - p[..., 2])
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, (10, 3))
    g = f.grad(pts, fd_step=1e-6)
    expect = np.stack([2 * pts[:, 0], np.cos(pts[:, 1]), -np.ones(10)], axis=1)
    assert np.allclose(g, expect, rtol=1e-6, atol=1e-8)


def test_supplied_gradient_agrees_with_central_differences():
    # the contract every built-in must satisfy
    for f, box in ((plane_field((1, 0, 1), 0.2), 1.0),
                   (sphere_field((0.1, 0, -0.2), 0.7), 1.0),
                   (orthocircle_field(), 1.2)):
        rng = np.random.default_rng(13)
        pts = rng.uniform(-box, box, (25, 3))
        assert np.allclose(f.grad(pts), central_diff(f, pts, 1e-6),
                           rtol=1e-5, atol=1e-6)


def test_unit_normal_is_unit():
    f = sphere_field((0, 0, 0), 0.5)
    pts = np.random.default_rng(1).uniform(0.2, 1, (10, 3))
    n = f.unit_normal(pts)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
