"""Built-in interface problems and a one-mesh run helper.

Each preset bundles the domain, the level-set interface, the diffusion
contrast, the manufactured right-hand side, and (when known) the exact
solution with its gradients, so tests and the command line drive every
experiment through the same object.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import SchemeParams, assemble, solve
from .cuts import MeshCuts, classify_mesh
from .levelset import (LevelSetField, orthocircle_field,
                       orthocircle_laplacian, plane_field, sphere_field)
from .mesh import BoxDomain, Mesh, build_mesh
from .trilinear import IFEBasisSet

__all__ = ["InterfaceProblem", "RunResult", "plane_problem",
           "sphere_problem", "orthocircle_problem", "PRESETS",
           "run_problem"]

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InterfaceProblem:
    """One elliptic interface problem, manufactured or data-driven."""
    name: str
    domain: BoxDomain
    field: LevelSetField
    beta_minus: float
    beta_plus: float
    f_minus: Evaluator
    f_plus: Evaluator
    g: Evaluator
    u_minus: Evaluator | None = None
    u_plus: Evaluator | None = None
    grad_minus: Evaluator | None = None
    grad_plus: Evaluator | None = None
    strict_hypotheses: bool = True

    @property
    def has_exact(self) -> bool:
        return self.u_minus is not None


def _side_select(field, minus, plus):
    def g(p):
        p = np.atleast_2d(p)
        return np.where(np.asarray(field(p)) < 0.0, minus(p), plus(p))
    return g


def plane_problem(beta_minus: float = 1.0,
                  beta_plus: float = 10.0) -> InterfaceProblem:
    """Plane interface x + z = pi/10 on (-1,1)^3 with the piecewise
    linear solution gamma/beta; lies in the immersed space, so the
    scheme reproduces it to round-off."""
    offset = (np.pi / 10.0) / np.sqrt(2.0)
    field = plane_field((1.0, 0.0, 1.0), offset)
    nhat = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)

    def gamma(p):
        return (p[..., 0] + p[..., 2] - np.pi / 10.0) / np.sqrt(2.0)

    u_m = lambda p: gamma(p) / beta_minus
    u_p = lambda p: gamma(p) / beta_plus
    g_m = lambda p: np.tile(nhat / beta_minus, (len(np.atleast_2d(p)), 1))
    g_p = lambda p: np.tile(nhat / beta_plus, (len(np.atleast_2d(p)), 1))
    zero = lambda p: np.zeros(len(np.atleast_2d(p)))
    return InterfaceProblem(
        name="plane", domain=BoxDomain((-1.0,) * 3, (1.0,) * 3), field=field,
        beta_minus=beta_minus, beta_plus=beta_plus,
        f_minus=zero, f_plus=zero, g=_side_select(field, u_m, u_p),
        u_minus=u_m, u_plus=u_p, grad_minus=g_m, grad_plus=g_p)


def sphere_problem() -> InterfaceProblem:
    """Sphere of radius pi/4 on (-1,1)^3, beta contrast pi/(2 r^2); the
    exact solution is -cos(alpha rho^2) inside and rho^2 - r^2 outside,
    with matching value and flux on the sphere."""
    r = np.pi / 4.0
    alpha = np.pi / (2.0 * r * r)
    bm, bp = 1.0, np.pi / (2.0 * r * r)
    field = sphere_field((0.0, 0.0, 0.0), r)
    rho2 = lambda p: np.einsum("...a,...a->...", p, p)

    u_m = lambda p: -np.cos(alpha * rho2(p))
    u_p = lambda p: rho2(p) - r * r
    g_m = lambda p: (2.0 * alpha * np.sin(alpha * rho2(p)))[..., None] * p
    g_p = lambda p: 2.0 * np.asarray(p, dtype=float)
    f_m = lambda p: -(6.0 * alpha * np.sin(alpha * rho2(p))
                      + 4.0 * alpha**2 * rho2(p) * np.cos(alpha * rho2(p)))
    f_p = lambda p: np.full(len(np.atleast_2d(p)), -6.0 * bp)
    return InterfaceProblem(
        name="sphere", domain=BoxDomain((-1.0,) * 3, (1.0,) * 3), field=field,
        beta_minus=bm, beta_plus=bp,
        f_minus=f_m, f_plus=f_p, g=_side_select(field, u_m, u_p),
        u_minus=u_m, u_plus=u_p, grad_minus=g_m, grad_plus=g_p)


def orthocircle_problem(width: float = 0.075) -> InterfaceProblem:
    """Three interlocked rings on (-1.2,1.2)^3 with contrast 100; the
    solution is the level-set function over beta on each side, so both
    right sides reduce to minus its Laplacian.  The tube width is thin
    relative to practical meshes, so the strict resolution hypotheses
    are relaxed to warnings for this preset."""
    bm, bp = 1.0, 100.0
    field = orthocircle_field(width)
    u_m = lambda p: np.asarray(field(p)) / bm
    u_p = lambda p: np.asarray(field(p)) / bp
    g_m = lambda p: field.grad(np.atleast_2d(p)) / bm
    g_p = lambda p: field.grad(np.atleast_2d(p)) / bp
    lap = lambda p: orthocircle_laplacian(p, width)
    f = lambda p: -lap(np.atleast_2d(p))
    return InterfaceProblem(
        name="orthocircle", domain=BoxDomain((-1.2,) * 3, (1.2,) * 3),
        field=field, beta_minus=bm, beta_plus=bp,
        f_minus=f, f_plus=f, g=_side_select(field, u_m, u_p),
        u_minus=u_m, u_plus=u_p, grad_minus=g_m, grad_plus=g_p,
        strict_hypotheses=False)


PRESETS = {
    "plane": plane_problem,
    "sphere": sphere_problem,
    "orthocircle": orthocircle_problem,
}


@dataclass(frozen=True)
class RunResult:
    """Everything one mesh run produces, with wall-clock timings."""
    mesh: Mesh
    cuts: MeshCuts
    bases: IFEBasisSet
    params: SchemeParams
    values: np.ndarray
    assembly_seconds: float
    solve_seconds: float


def run_on_mesh(problem: InterfaceProblem, mesh: Mesh, *,
                field=None, epsilon: float = -1.0, sigma0: float = 10.0,
                tol: float = 1e-10, max_iter: int | None = None,
                quadrature: str = "plane", subsample: int = 4) -> RunResult:
    """Classify, assemble, and solve on a prebuilt mesh.

    field overrides problem.field; that is how mesh-bound level sets
    (nodal signed-distance fields) are swapped in per refinement."""
    cuts = classify_mesh(mesh, problem.field if field is None else field,
                         strict=problem.strict_hypotheses)
    bases = IFEBasisSet(mesh, cuts, problem.beta_minus, problem.beta_plus)
    params = SchemeParams(beta_minus=problem.beta_minus,
                          beta_plus=problem.beta_plus, epsilon=epsilon,
                          sigma0=sigma0, interface_quadrature=quadrature,
                          subsample=subsample)
    t0 = time.perf_counter()
    system = assemble(mesh, cuts, bases, params, problem.f_minus,
                      problem.f_plus, problem.g)
    t1 = time.perf_counter()
    values = solve(system, tol=tol, max_iter=max_iter)
    t2 = time.perf_counter()
    return RunResult(mesh=mesh, cuts=cuts, bases=bases, params=params,
                     values=values, assembly_seconds=t1 - t0,
                     solve_seconds=t2 - t1)


def run_problem(problem: InterfaceProblem, n: int, **kwargs) -> RunResult:
    """Mesh, classify, assemble, and solve the problem on an n^3 grid."""
    mesh = build_mesh(problem.domain, (n, n, n))
    return run_on_mesh(problem, mesh, **kwargs)
