"""Assembly and solution of the penalized immersed finite element
system.

The bilinear form is

    a_h(u, v) = sum_T int_T beta grad u . grad v
              + sum_F int_F {beta grad u . n} [v]
              - eps * sum_F int_F {beta grad v . n} [u]
              + (sigma / h) * sum_F int_F [u][v]

over the faces F touching at least one interface element, with the face
normal n pointing from the lower to the upper neighbor, the jump
[w] = w_upper - w_lower, and the average {w} = (w_lower+w_upper)/2.
With that orientation pairing the first face term restores Galerkin
consistency and eps = -1 gives a symmetric positive form (eps = +1 the
nonsymmetric variant, eps = 0 the incomplete one).  sigma scales as
sigma0 * (beta^+)^2 / beta^-.

Dirichlet data is imposed nodally on the boundary and eliminated
symmetrically before the Krylov solve.  Where the interface crosses a
domain-boundary face the trace of an immersed basis function is only
piecewise bilinear, so nodal values cannot pin it down between the
nodes; such faces enter the face sum one-sided (the average is the
inner flux, the missing trace is the boundary data g) which keeps the
form consistent and, for eps = -1, symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, bicgstab, cg

from .cuts import CutPlane, MeshCuts
from .mesh import FACE_VERTS, Mesh
from .quadrature import cuboid_rule, face_rule, tessellate_cut, volume_rule
from .trilinear import (IFEBasisSet, monomial_gradients, monomials,
                        std_local_coeffs)


class AssemblyError(RuntimeError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class SchemeParams:
    """Penalty scheme parameters; sigma is derived, not stored."""

    beta_minus: float
    beta_plus: float
    epsilon: float = -1.0
    sigma0: float = 10.0
    volume_degree: int = 4
    face_degree: int = 4
    cuboid_order: int = 3
    interface_quadrature: str = "plane"  # or "levelset"
    subsample: int = 4                   # per-axis split in levelset mode

    def __post_init__(self):
        if self.beta_minus <= 0.0 or self.beta_plus <= 0.0:
            raise ValueError("beta must be positive on both sides")
        if self.epsilon not in (-1.0, 0.0, 1.0):
            raise ValueError("epsilon must be -1, 0 or +1")
        if self.sigma0 <= 0.0:
            raise ValueError("sigma0 must be positive")
        if self.interface_quadrature not in ("plane", "levelset"):
            raise ValueError("interface_quadrature must be 'plane' or "
                             "'levelset'")

    @property
    def sigma(self) -> float:
        return self.sigma0 * self.beta_plus ** 2 / self.beta_minus


@dataclass
class LinearSystem:
    matrix: sparse.csr_matrix           # a_h, before boundary elimination
    energy: sparse.csr_matrix           # Gram matrix of the energy norm
    rhs: np.ndarray
    dirichlet_ids: np.ndarray
    dirichlet_values: np.ndarray
    params: SchemeParams


class _COO:
    """Accumulator for triplet blocks."""

    def __init__(self):
        self.rows, self.cols, self.data = [], [], []

    def add_block(self, dofs: np.ndarray, block: np.ndarray):
        m = len(dofs)
        self.rows.append(np.repeat(dofs, m))
        self.cols.append(np.tile(dofs, m))
        self.data.append(block.ravel())

    def add_batch(self, dof_table: np.ndarray, blocks: np.ndarray):
        e, m = dof_table.shape
        self.rows.append(np.repeat(dof_table, m, axis=1).ravel())
        self.cols.append(np.tile(dof_table, (1, m)).ravel())
        self.data.append(blocks.ravel())

    def matrix(self, n: int, *others: "_COO") -> sparse.csr_matrix:
        rows = np.concatenate(self.rows + sum((o.rows for o in others), []))
        cols = np.concatenate(self.cols + sum((o.cols for o in others), []))
        data = np.concatenate(self.data + sum((o.data for o in others), []))
        return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def _unit_stiffness(mesh: Mesh, order: int) -> np.ndarray:
    """Standard trilinear stiffness of one cell at unit beta."""
    lo, hi = mesh.element_box(0)
    rule = cuboid_rule(lo, hi, order)
    xi = (rule.points - lo) / mesh.spacing
    grads = (monomial_gradients(xi) @ std_local_coeffs().T
             / mesh.spacing[None, :, None])
    return np.einsum("q,qai,qaj->ij", rule.weights, grads, grads)


def _interface_rules(mesh: Mesh, cuts: MeshCuts, elem: int,
                     params: SchemeParams):
    """(points, weights, sides) of the volume rule on one cut element."""
    lo, hi = mesh.element_box(elem)
    if params.interface_quadrature == "plane":
        cells = tessellate_cut(lo, hi, cuts.cuts[elem].plane)
        rm = volume_rule(cells, -1, params.volume_degree)
        rp = volume_rule(cells, +1, params.volume_degree)
        pts = np.concatenate([rm.points, rp.points])
        wts = np.concatenate([rm.weights, rp.weights])
        sides = np.concatenate([np.full(rm.n, -1, dtype=np.int8),
                                np.full(rp.n, 1, dtype=np.int8)])
        return pts, wts, sides
    # subdivided tensor rule with the side of each point taken from the
    # level set itself
    m = params.subsample
    edges = np.linspace(0.0, 1.0, m + 1)
    pts, wts = [], []
    for i in range(m):
        for j in range(m):
            for k in range(m):
                sub_lo = lo + np.array([edges[i], edges[j], edges[k]]) * (hi - lo)
                sub_hi = lo + np.array([edges[i + 1], edges[j + 1],
                                        edges[k + 1]]) * (hi - lo)
                r = cuboid_rule(sub_lo, sub_hi, params.cuboid_order)
                pts.append(r.points)
                wts.append(r.weights)
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    sides = np.where(cuts.field(pts) < 0.0, -1, 1).astype(np.int8)
    return pts, wts, sides


class FaceTraces:
    """Face-trace evaluation of values and normal fluxes per element."""

    def __init__(self, mesh: Mesh, cuts: MeshCuts, bases: IFEBasisSet,
                 params: SchemeParams):
        self.mesh = mesh
        self.cuts = cuts
        self.bases = bases
        self.std = std_local_coeffs()
        self.bm = params.beta_minus
        self.bp = params.beta_plus

    def values_and_flux(self, elem: int, points: np.ndarray,
                        sides: np.ndarray, axis: int):
        lo, _ = self.mesh.element_box(elem)
        xi = (points - lo) / self.mesh.spacing
        M = monomials(xi)
        Gn = monomial_gradients(xi)[:, axis, :] / self.mesh.spacing[axis]
        if elem in self.bases:
            row = self.bases.row(elem)
            cm = self.bases.coeffs_minus[row]
            cp = self.bases.coeffs_plus[row]
        else:
            cm = cp = self.std
        minus = (sides < 0)[:, None]
        beta = np.where(minus, self.bm, self.bp)
        vals = np.where(minus, M @ cm.T, M @ cp.T)
        flux = beta * np.where(minus, Gn @ cm.T, Gn @ cp.T)
        return vals, flux


def _face_is_conforming(cuts: MeshCuts, elem: int, rect, local_face: int,
                        tol: float) -> bool:
    """True when the element's trace on the face is plain bilinear nodal
    interpolation, so jumps against a conforming neighbor vanish."""
    cut = cuts.cuts.get(elem)
    if cut is None:
        return True
    axis, coord, lo3, hi3 = rect
    t1, t2 = [ax for ax in range(3) if ax != axis]
    c10, c01 = lo3.copy(), lo3.copy()
    c10[t1] = hi3[t1]
    c01[t2] = hi3[t2]
    d = cut.plane.signed_dist(np.stack([lo3, c10, hi3, c01]))
    if np.any(d < -tol) and np.any(d > tol):
        return False                      # plane trace crosses the face
    side = -1 if np.min(d) < -tol else 1
    return bool(np.all(cut.vertex_signs[FACE_VERTS[local_face]] == side))


def assemble(mesh: Mesh, cuts: MeshCuts, bases: IFEBasisSet,
             params: SchemeParams, f_minus, f_plus, g) -> LinearSystem:
    """Build the linear system and the energy-norm Gram matrix.

    f_minus / f_plus are the source branches, g the boundary data; all
    take (n, 3) point arrays.
    """
    if (params.beta_minus, params.beta_plus) != bases.betas:
        raise AssemblyError("scheme parameters and basis set disagree on "
                            "the beta pair")
    missing = set(cuts.cuts) - {int(e) for e in bases.elements}
    if missing:
        raise AssemblyError(
            f"no immersed basis for interface element(s) {sorted(missing)[:5]}")

    EN = mesh.all_element_nodes()
    n = mesh.n_nodes
    rhs = np.zeros(n)
    vol = _COO()        # shared by the scheme matrix and the energy norm
    face_a = _COO()     # scheme-only face terms
    face_e = _COO()     # energy-only face terms

    # volume terms of uncut elements: one unit stiffness scaled by beta
    K_unit = _unit_stiffness(mesh, params.cuboid_order)
    uncut = np.nonzero(cuts.kinds != 0)[0]
    if uncut.size:
        beta_e = np.where(cuts.kinds[uncut] < 0, params.beta_minus,
                          params.beta_plus)
        vol.add_batch(EN[uncut], beta_e[:, None, None] * K_unit[None])

    # their loads, chunked
    lo0, hi0 = mesh.element_box(0)
    ref_rule = cuboid_rule(lo0, hi0, params.cuboid_order)
    ref_pts = ref_rule.points - lo0
    phi_ref = monomials(ref_pts / mesh.spacing) @ std_local_coeffs().T
    for chunk in np.array_split(uncut, max(1, uncut.size // 20000)):
        if chunk.size == 0:
            continue
        pts = mesh.element_box(chunk)[0][:, None, :] + ref_pts[None]
        flat = pts.reshape(-1, 3)
        fvals = np.empty(len(flat))
        is_minus = np.repeat(cuts.kinds[chunk] < 0, ref_rule.n)
        if np.any(is_minus):
            fvals[is_minus] = np.asarray(f_minus(flat[is_minus]), dtype=float)
        if np.any(~is_minus):
            fvals[~is_minus] = np.asarray(f_plus(flat[~is_minus]), dtype=float)
        fw = fvals.reshape(len(chunk), -1) * ref_rule.weights[None]
        np.add.at(rhs, EN[chunk], fw @ phi_ref)

    # interface elements: piecewise volume rules for stiffness and load
    for elem in sorted(cuts.cuts):
        basis = bases.basis(elem)
        pts, wts, sides = _interface_rules(mesh, cuts, elem, params)
        minus = sides < 0
        beta = np.where(minus, params.beta_minus, params.beta_plus)
        grads = np.where(minus[:, None, None],
                         basis.grad_all(pts, -1), basis.grad_all(pts, 1))
        vals = np.where(minus[:, None],
                        basis.eval_all(pts, -1), basis.eval_all(pts, 1))
        K = np.einsum("q,qai,qaj->ij", wts * beta, grads, grads)
        vol.add_block(EN[elem], K)
        fvals = np.empty(len(pts))
        if np.any(minus):
            fvals[minus] = np.asarray(f_minus(pts[minus]), dtype=float)
        if np.any(~minus):
            fvals[~minus] = np.asarray(f_plus(pts[~minus]), dtype=float)
        np.add.at(rhs, EN[elem], (wts * fvals) @ vals)

    # face terms on interior faces touching an interface element
    traces = FaceTraces(mesh, cuts, bases, params)
    sigma_over_h = params.sigma / mesh.h
    h_over_sigma = mesh.h / params.sigma
    tol = 1e-14 * mesh.h
    for f in cuts.scheme_faces():
        e_lo, e_hi = mesh.face_neighbors(int(f))
        rect = mesh.face_rect(int(f))
        axis = rect[0]
        if e_lo >= 0 and e_hi >= 0:
            if (_face_is_conforming(cuts, e_lo, rect, 2 * axis + 1, tol)
                    and _face_is_conforming(cuts, e_hi, rect, 2 * axis, tol)):
                continue
            cut_lo = cuts.cuts.get(e_lo)
            cut_hi = cuts.cuts.get(e_hi)
            fr = face_rule(rect,
                           cut_lo.plane if cut_lo else int(cuts.kinds[e_lo]),
                           cut_hi.plane if cut_hi else int(cuts.kinds[e_hi]),
                           params.face_degree)
            v_lo, q_lo = traces.values_and_flux(e_lo, fr.points,
                                                fr.side_left, axis)
            v_hi, q_hi = traces.values_and_flux(e_hi, fr.points,
                                                fr.side_right, axis)
            J = np.concatenate([-v_lo, v_hi], axis=1)       # jump upper - lower
            A = 0.5 * np.concatenate([q_lo, q_hi], axis=1)  # mean normal flux
            dofs = np.concatenate([EN[e_lo], EN[e_hi]])
            data = None
        else:
            # domain-boundary face of an interface element.  An immersed
            # basis function whose trace here is genuinely piecewise does
            # not vanish between the nodes, so nodal boundary values alone
            # leave the scheme inconsistent.  Add the one-sided flux,
            # adjoint, and penalty terms, with the boundary data g playing
            # the missing neighbor's trace; the g-dependent parts land in
            # the right-hand side.
            e_in = e_lo if e_lo >= 0 else e_hi
            local_face = 2 * axis + 1 if e_lo >= 0 else 2 * axis
            if _face_is_conforming(cuts, e_in, rect, local_face, tol):
                continue
            plane = cuts.cuts[e_in].plane
            fr = face_rule(rect, plane, plane, params.face_degree)
            v_in, q_in = traces.values_and_flux(e_in, fr.points,
                                                fr.side_left, axis)
            if e_lo >= 0:
                J, ghost_sign = -v_in, 1.0   # missing neighbor is above
            else:
                J, ghost_sign = v_in, -1.0   # missing neighbor is below
            A = q_in                         # one-sided average
            dofs = EN[e_in]
            data = ghost_sign * np.asarray(g(fr.points), dtype=float)
        wA = fr.weights[:, None] * A
        P = J.T @ wA
        pen = sigma_over_h * (J.T @ (fr.weights[:, None] * J))
        avg = h_over_sigma * (A.T @ wA)
        face_a.add_block(dofs, P - params.epsilon * P.T + pen)
        face_e.add_block(dofs, pen + avg)
        if data is not None:
            wg = fr.weights * data
            np.add.at(rhs, dofs,
                      params.epsilon * (A.T @ wg) - sigma_over_h * (J.T @ wg))

    matrix = vol.matrix(n, face_a)
    energy = vol.matrix(n, face_e)
    ids = mesh.boundary_node_ids()
    values = np.asarray(g(mesh.node_coords(ids)), dtype=float)
    return LinearSystem(matrix=matrix, energy=energy, rhs=rhs,
                        dirichlet_ids=ids, dirichlet_values=values,
                        params=params)


def apply_dirichlet(system: LinearSystem):
    """Symmetric elimination of the boundary values.

    Returns (reduced matrix, reduced rhs, interior node ids).
    """
    n = system.matrix.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[system.dirichlet_ids] = False
    interior = np.nonzero(keep)[0]
    shifted = system.rhs - system.matrix[:, system.dirichlet_ids] @ \
        system.dirichlet_values
    reduced = system.matrix[interior][:, interior].tocsr()
    return reduced, shifted[interior], interior


def solve(system: LinearSystem, tol: float = 1e-10,
          max_iter: int | None = None) -> np.ndarray:
    """Diagonal-preconditioned Krylov solve of the reduced system:
    conjugate gradients when the form is symmetric (eps = -1), the
    stabilized bi-conjugate variant otherwise."""
    A, b, interior = apply_dirichlet(system)
    u = np.zeros(system.matrix.shape[0])
    u[system.dirichlet_ids] = system.dirichlet_values
    if interior.size == 0:
        return u
    if max_iter is None:
        max_iter = max(1000, 10 * interior.size)
    diag = A.diagonal()
    diag[diag == 0.0] = 1.0
    precond = LinearOperator(A.shape, matvec=lambda x: x / diag)
    method = cg if system.params.epsilon == -1.0 else bicgstab
    try:
        x, info = method(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=precond)
    except TypeError:  # older scipy spells the relative tolerance 'tol'
        x, info = method(A, b, tol=tol, atol=0.0, maxiter=max_iter, M=precond)
    if info != 0:
        res = float(np.linalg.norm(b - A @ x)
                    / max(np.linalg.norm(b), 1e-300))
        raise NonConvergenceError(
            f"linear solver stalled (info={info}) at relative residual "
            f"{res:.3e}", residual=res)
    u[interior] = x
    return u
