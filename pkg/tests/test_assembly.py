"""System assembly checks: exact reduction to standard FEM on uncut
meshes (against an independently coded oracle), symmetry, constants in
the kernel, positivity, Galerkin consistency for a plane interface whose
exact solution lies in the immersed space, and solver behavior."""
import numpy as np
import pytest
from scipy import sparse

from ife3d.assembly import (AssemblyError, LinearSystem, NonConvergenceError,
                            SchemeParams, apply_dirichlet, assemble, solve)
from ife3d.cuts import classify_mesh
from ife3d.levelset import plane_field, sphere_field
from ife3d.mesh import BoxDomain, build_mesh
from ife3d.trilinear import IFEBasisSet, interpolate

ZERO = lambda p: np.zeros(len(np.atleast_2d(p)))
ONE = lambda p: np.ones(len(np.atleast_2d(p)))


def build_problem(field, domain, counts, bm, bp, f_minus=ZERO, f_plus=ZERO,
                  g=ZERO, **kw):
    mesh = build_mesh(domain, counts)
    cuts = classify_mesh(mesh, field)
    params = SchemeParams(beta_minus=bm, beta_plus=bp, **kw)
    bases = IFEBasisSet(mesh, cuts, bm, bp)
    system = assemble(mesh, cuts, bases, params, f_minus, f_plus, g)
    return mesh, cuts, bases, system


def fem_stiffness_oracle(mesh, beta):
    """Standard trilinear stiffness, coded independently: tensor-product
    hat functions differentiated by hand, 3-point Gauss per axis."""
    t, wt = np.polynomial.legendre.leggauss(3)
    t = (t + 1.0) / 2.0
    wt = wt / 2.0
    s = mesh.spacing
    shape1d = np.stack([1.0 - t, t])          # (2, q)
    dshape1d = np.stack([-np.ones_like(t), np.ones_like(t)])
    n = mesh.n_nodes
    K = np.zeros((n, n))
    for e in range(mesh.n_elements):
        nodes = mesh.element_nodes(e)
        loc = np.zeros((8, 8))
        for qx in range(3):
            for qy in range(3):
                for qz in range(3):
                    w = wt[qx] * wt[qy] * wt[qz] * s[0] * s[1] * s[2]
                    g = np.zeros((8, 3))
                    for v in range(8):
                        dx, dy, dz = v & 1, (v >> 1) & 1, (v >> 2) & 1
                        g[v, 0] = (dshape1d[dx, qx] / s[0]
                                   * shape1d[dy, qy] * shape1d[dz, qz])
                        g[v, 1] = (shape1d[dx, qx] * dshape1d[dy, qy] / s[1]
                                   * shape1d[dz, qz])
                        g[v, 2] = (shape1d[dx, qx] * shape1d[dy, qy]
                                   * dshape1d[dz, qz] / s[2])
                    loc += w * beta * (g @ g.T)
        K[np.ix_(nodes, nodes)] += loc
    return K


def test_uncut_mesh_reduces_to_standard_fem():
    domain = BoxDomain(np.zeros(3), np.array([1.0, 2.0, 1.0]))
    field = plane_field((1, 0, 0), 10.0)  # far away, nothing is cut
    mesh, cuts, bases, system = build_problem(field, domain, (3, 4, 3),
                                              2.5, 2.5)
    assert len(cuts.cuts) == 0
    got = system.matrix.toarray()
    want = fem_stiffness_oracle(mesh, 2.5)
    scale = np.max(np.abs(want))
    assert np.max(np.abs(got - want)) <= 1e-12 * scale
    # energy Gram coincides with the form when no face terms exist
    assert np.max(np.abs(system.energy.toarray() - want)) <= 1e-12 * scale


def sphere_problem(n=10, bm=1.0, bp=10.0, **kw):
    return build_problem(sphere_field((0.0, 0.0, 0.0), np.pi / 4.0),
                         BoxDomain(-np.ones(3), np.ones(3)), (n, n, n),
                         bm, bp, f_minus=ONE, f_plus=ONE, **kw)


def test_symmetry_and_constant_kernel():
    mesh, cuts, bases, system = sphere_problem()
    assert len(cuts.cuts) > 0
    A = system.matrix
    scale = np.max(np.abs(A.data))
    asym = (A - A.T).tocoo()
    assert (np.max(np.abs(asym.data)) if asym.nnz else 0.0) <= 1e-12 * scale
    ones = np.ones(A.shape[0])
    assert np.max(np.abs(A @ ones)) <= 1e-10 * scale
    E = system.energy
    easym = (E - E.T).tocoo()
    assert (np.max(np.abs(easym.data)) if easym.nnz else 0.0) <= 1e-12 * scale


def test_positivity_random_vectors():
    rng = np.random.default_rng(11)
    _, _, _, system = sphere_problem()
    A, E = system.matrix, system.energy
    for _ in range(100):
        v = rng.normal(size=A.shape[0])
        quad = v @ (A @ v)
        energy = v @ (E @ v)
        assert energy > 0.0
        assert quad > 0.0


def test_epsilon_variants():
    _, _, _, sym = sphere_problem(n=6)
    _, _, _, non = sphere_problem(n=6, epsilon=1.0)
    _, _, _, inc = sphere_problem(n=6, epsilon=0.0)
    scale = np.max(np.abs(sym.matrix.data))
    d1 = (non.matrix - sym.matrix).tocoo()
    d2 = (inc.matrix - sym.matrix).tocoo()
    assert np.max(np.abs(d1.data)) > 1e-8 * scale
    assert np.max(np.abs(d2.data)) > 1e-8 * scale
    with pytest.raises(ValueError):
        SchemeParams(beta_minus=1.0, beta_plus=2.0, epsilon=0.5)


def test_levelset_quadrature_variant_close_to_plane_cut():
    _, _, _, plane_sys = sphere_problem(n=6)
    _, _, _, ls_sys = sphere_problem(n=6, interface_quadrature="levelset")
    diff = sparse.linalg.norm(plane_sys.matrix - ls_sys.matrix)
    assert diff <= 0.1 * sparse.linalg.norm(plane_sys.matrix)
    asym = (ls_sys.matrix - ls_sys.matrix.T).tocoo()
    scale = np.max(np.abs(ls_sys.matrix.data))
    assert np.max(np.abs(asym.data)) <= 1e-12 * scale


def plane_exact_problem(n):
    """Interface x + z = pi/10 with piecewise-linear exact solution that
    lies in the immersed space (gamma / beta on each side)."""
    bm, bp = 1.0, 10.0
    off = (np.pi / 10.0) / np.sqrt(2.0)
    field = plane_field((1, 0, 1), off)
    gamma = lambda p: (p[:, 0] + p[:, 2] - np.pi / 10.0) / np.sqrt(2.0)
    u_m = lambda p: gamma(p) / bm
    u_p = lambda p: gamma(p) / bp

    def g(p):
        p = np.atleast_2d(p)
        return np.where(field(p) < 0.0, u_m(p), u_p(p))

    mesh, cuts, bases, system = build_problem(
        field, BoxDomain(-np.ones(3), np.ones(3)), (n, n, n), bm, bp, g=g)
    exact = interpolate(u_m, u_p, mesh, cuts)
    return mesh, cuts, system, exact


def test_plane_solution_consistency_and_recovery():
    mesh, cuts, system, exact = plane_exact_problem(6)
    assert len(cuts.cuts) > 0
    A, b, interior = apply_dirichlet(system)
    residual = A @ exact[interior] - b
    assert np.max(np.abs(residual)) <= 1e-10
    u = solve(system, tol=1e-13)
    assert np.max(np.abs(u - exact)) <= 1e-9


def test_dirichlet_handling():
    # all-boundary mesh: solution is just the boundary data
    field = plane_field((1, 0, 0), 0.5)
    g = lambda p: np.atleast_2d(p)[:, 0] + 2.0
    mesh, cuts, bases, system = build_problem(
        field, BoxDomain(np.zeros(3), np.ones(3)), (1, 1, 1), 1.0, 2.0, g=g)
    u = solve(system)
    assert np.allclose(u, g(mesh.all_node_coords()), atol=1e-14)
    # zero boundary data leaves interior rhs untouched
    mesh2, _, _, system2 = build_problem(
        field, BoxDomain(np.zeros(3), np.ones(3)), (3, 3, 3), 1.0, 2.0,
        f_minus=ONE, f_plus=ONE)
    _, b, interior = apply_dirichlet(system2)
    assert np.array_equal(b, system2.rhs[interior])


def test_identity_system_solves_immediately():
    n = 50
    rng = np.random.default_rng(1)
    b = rng.normal(size=n)
    params = SchemeParams(beta_minus=1.0, beta_plus=1.0)
    eye = sparse.identity(n, format="csr")
    system = LinearSystem(matrix=eye, energy=eye, rhs=b,
                          dirichlet_ids=np.array([0], dtype=np.int64),
                          dirichlet_values=np.array([5.0]), params=params)
    u = solve(system, tol=1e-12)
    assert u[0] == 5.0
    assert np.allclose(u[1:], b[1:], atol=1e-10)


def test_solver_nonconvergence_raises():
    with pytest.raises(NonConvergenceError) as info:
        _, _, _, system = sphere_problem(n=6)
        solve(system, tol=1e-14, max_iter=2)
    assert info.value.residual > 0.0


def test_mismatched_bases_rejected():
    domain = BoxDomain(-np.ones(3), np.ones(3))
    mesh = build_mesh(domain, (6, 6, 6))
    sphere_cuts = classify_mesh(mesh, sphere_field((0, 0, 0), np.pi / 4.0))
    empty_cuts = classify_mesh(mesh, plane_field((1, 0, 0), 50.0))
    params = SchemeParams(beta_minus=1.0, beta_plus=10.0)
    empty_bases = IFEBasisSet(mesh, empty_cuts, 1.0, 10.0)
    with pytest.raises(AssemblyError):
        assemble(mesh, sphere_cuts, empty_bases, params, ZERO, ZERO, ZERO)
    wrong_beta = IFEBasisSet(mesh, sphere_cuts, 1.0, 100.0)
    with pytest.raises(AssemblyError):
        assemble(mesh, sphere_cuts, wrong_beta, params, ZERO, ZERO, ZERO)
