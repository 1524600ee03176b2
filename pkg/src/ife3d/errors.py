"""Error norms, convergence-rate regression, and inequality probes.

Norms measured against an exact (or reference) solution given as a pair
of side evaluators.  The discrete max error is taken over mesh nodes.
L2 and H1 errors integrate per element; at each quadrature point the
exact branch is chosen by the sign of the level set (so the comparison
is against the true solution even inside the thin band where the fitted
plane and the interface disagree) while the discrete branch follows the
plane that defined the basis.  The energy norm adds the face jump and
mean-flux terms with weights sigma/h and h/sigma, over the same face
set the scheme penalizes; the H1 error is the plain seminorm of the
difference, the energy volume term weights by the true-side beta.

The inequality probes draw random immersed functions (nodal values
uniform in [-1, 1]) on interface elements and report the worst observed
ratio of the trace, inverse, and interface-jump bounds; the theory says
these stay bounded as the mesh refines, which the tests check by
comparing probes across mesh sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import FaceTraces, SchemeParams
from .cuts import MeshCuts
from .mesh import Mesh
from .quadrature import (cuboid_rule, face_rule, surface_rule,
                         tessellate_cut, volume_rule)
from .trilinear import (IFEBasisSet, standard_eval_all, standard_grad_all,
                        std_local_coeffs, monomials, monomial_gradients)

__all__ = ["ErrorReport", "FESolution", "norm_errors", "convergence_rates",
           "inequality_probe", "ERRORS_CSV_HEADER", "errors_csv_row"]

ERRORS_CSV_HEADER = ("N,h,e_inf,e_0,e_1,e_energy,assembly_s,solve_s,"
                     "interface_element_pct")


def _csv_num(v) -> str:
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def errors_csv_row(report, *, N=None, h=None, assembly_s=None, solve_s=None,
                   interface_pct=None) -> str:
    """Format one errors.csv row (schema in ERRORS_CSV_HEADER).

    report may be None for solves whose errors are not measured (the
    reference run itself); pass N and h explicitly then.  Missing
    values are written as nan."""
    if report is not None:
        N, h = report.N, report.h
        cols = [report.e_inf, report.e_0, report.e_1, report.e_energy]
    else:
        cols = [None, None, None, None]
    lead = [str(int(N)), _csv_num(h)]
    tail = [_csv_num(assembly_s), _csv_num(solve_s), _csv_num(interface_pct)]
    return ",".join(lead + [_csv_num(c) for c in cols] + tail)


@dataclass(frozen=True)
class ErrorReport:
    """Error norms of one run on one mesh."""
    N: int
    h: float
    e_inf: float
    e_0: float
    e_1: float
    e_energy: float | None = None

    def __post_init__(self):
        vals = [self.N, self.h, self.e_inf, self.e_0, self.e_1]
        if self.e_energy is not None:
            vals.append(self.e_energy)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError("error report entries must be finite and >= 0")


class FESolution:
    """Point evaluator for a solved nodal field.

    Wraps the nodal vector together with the immersed bases so the
    discrete solution (and its gradient) can be sampled anywhere, e.g.
    to serve as the reference solution for a coarser run.
    """

    def __init__(self, mesh: Mesh, cuts: MeshCuts, bases: IFEBasisSet,
                 values: np.ndarray):
        self.mesh = mesh
        self.cuts = cuts
        self.bases = bases
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (mesh.n_nodes,):
            raise ValueError("nodal vector length does not match the mesh")

    def element_of(self, points: np.ndarray) -> np.ndarray:
        """Element id containing each point (boundary ties go low)."""
        pts = np.atleast_2d(points)
        lo = np.asarray(self.mesh.domain.lo)
        idx = np.floor((pts - lo) / self.mesh.spacing).astype(np.int64)
        idx = np.clip(idx, 0, np.asarray(self.mesh.shape) - 1)
        return self.mesh.element_id(idx[:, 0], idx[:, 1], idx[:, 2])

    def _eval(self, points, want_grad: bool):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        elems = np.atleast_1d(self.element_of(pts))
        out = np.empty((len(pts), 3) if want_grad else len(pts))
        cut_mask = self.cuts.kinds[elems] == 0
        if np.any(~cut_mask):
            sel = np.nonzero(~cut_mask)[0]
            dofs = self.values[self.mesh.element_nodes(elems[sel])]
            if want_grad:
                tab = standard_grad_all(self.mesh, elems[sel], pts[sel])
                out[sel] = np.einsum("nak,nk->na", tab, dofs)
            else:
                tab = standard_eval_all(self.mesh, elems[sel], pts[sel])
                out[sel] = np.einsum("nk,nk->n", tab, dofs)
        for e in np.unique(elems[cut_mask]):
            sel = np.nonzero(elems == e)[0]
            basis = self.bases.basis(int(e))
            side = np.where(
                self.cuts.cuts[int(e)].plane.signed_dist(pts[sel]) < 0, -1, 1)
            dofs = self.values[self.mesh.element_nodes(int(e))]
            for s in (-1, 1):
                m = side == s
                if not np.any(m):
                    continue
                if want_grad:
                    tab = basis.grad_all(pts[sel[m]], s)
                    out[sel[m]] = np.einsum("nak,k->na", tab, dofs)
                else:
                    out[sel[m]] = basis.eval_all(pts[sel[m]], s) @ dofs
        return out

    def __call__(self, points) -> np.ndarray:
        return self._eval(points, want_grad=False)

    def gradient(self, points) -> np.ndarray:
        return self._eval(points, want_grad=True)


def _exact_at(points, field, u_minus, u_plus):
    minus = np.asarray(field(points)) < 0.0
    out = np.empty(len(points))
    if np.any(minus):
        out[minus] = np.asarray(u_minus(points[minus]), dtype=float)
    if np.any(~minus):
        out[~minus] = np.asarray(u_plus(points[~minus]), dtype=float)
    return out, minus


def _exact_grad_at(points, minus, grad_minus, grad_plus):
    out = np.empty((len(points), 3))
    if np.any(minus):
        out[minus] = np.asarray(grad_minus(points[minus]), dtype=float)
    if np.any(~minus):
        out[~minus] = np.asarray(grad_plus(points[~minus]), dtype=float)
    return out


def norm_errors(values, mesh: Mesh, cuts: MeshCuts, bases: IFEBasisSet,
                u_minus, u_plus, grad_minus, grad_plus,
                params: SchemeParams | None = None,
                volume_order: int = 3, face_degree: int = 4) -> ErrorReport:
    """Discrete max, L2, and H1(-seminorm) errors; energy too if params
    is given (it supplies sigma and the betas for the face weights)."""
    values = np.asarray(values, dtype=float)
    field = cuts.field

    coords = mesh.all_node_coords()
    node_exact = np.empty(mesh.n_nodes)
    minus = cuts.node_signs < 0
    node_exact[minus] = np.asarray(u_minus(coords[minus]), dtype=float)
    node_exact[~minus] = np.asarray(u_plus(coords[~minus]), dtype=float)
    e_inf = float(np.max(np.abs(values - node_exact)))

    e0_sq = 0.0
    e1_sq = 0.0
    energy_sq = 0.0
    bm = params.beta_minus if params is not None else None
    bp = params.beta_plus if params is not None else None

    # uncut elements in bulk: one reference rule shared by all
    ref = cuboid_rule(np.zeros(3), mesh.spacing, order=volume_order)
    ref_xi = ref.points / mesh.spacing
    phi_ref = monomials(ref_xi) @ std_local_coeffs().T
    grad_ref = (monomial_gradients(ref_xi) @ std_local_coeffs().T
                / mesh.spacing[None, :, None])
    uncut = np.nonzero(cuts.kinds != 0)[0]
    EN = mesh.element_nodes(uncut) if len(uncut) else None
    for chunk in np.array_split(np.arange(len(uncut)),
                                max(1, len(uncut) // 20000 + 1)):
        if not len(chunk):
            continue
        elems = uncut[chunk]
        lo = mesh.element_box(elems)[0]
        pts = (lo[:, None, :] + ref.points).reshape(-1, 3)
        dofs = values[EN[chunk]]
        uh = (dofs @ phi_ref.T).ravel()
        gh = np.einsum("qak,nk->nqa", grad_ref, dofs).reshape(-1, 3)
        ex, pm = _exact_at(pts, field, u_minus, u_plus)
        gx = _exact_grad_at(pts, pm, grad_minus, grad_plus)
        w = np.tile(ref.weights, len(elems))
        diff = uh - ex
        gd = gh - gx
        e0_sq += float(w @ diff**2)
        gd_sq = np.einsum("na,na->n", gd, gd)
        e1_sq += float(w @ gd_sq)
        if params is not None:
            beta = np.where(pm, bm, bp)
            energy_sq += float((w * beta) @ gd_sq)

    # interface elements: plane-cut rules per side
    for e, cut in cuts.cuts.items():
        lo, hi = mesh.element_box(e)
        cells = tessellate_cut(lo, hi, cut.plane)
        basis = bases.basis(e)
        dofs = values[mesh.element_nodes(e)]
        for side in (-1, 1):
            rule = volume_rule(cells, side, degree=2 * volume_order - 1)
            if rule.n == 0:
                continue
            uh = basis.eval_all(rule.points, side) @ dofs
            gh = np.einsum("nak,k->na", basis.grad_all(rule.points, side),
                           dofs)
            ex, pm = _exact_at(rule.points, field, u_minus, u_plus)
            gx = _exact_grad_at(rule.points, pm, grad_minus, grad_plus)
            diff = uh - ex
            gd = gh - gx
            gd_sq = np.einsum("na,na->n", gd, gd)
            e0_sq += float(rule.weights @ diff**2)
            e1_sq += float(rule.weights @ gd_sq)
            if params is not None:
                beta = np.where(pm, bm, bp)
                energy_sq += float((rule.weights * beta) @ gd_sq)

    e_energy = None
    if params is not None:
        traces = FaceTraces(mesh, cuts, bases, params)
        sigma_over_h = params.sigma / mesh.h
        h_over_sigma = mesh.h / params.sigma

        def trace_plane(elem):
            c = cuts.cuts.get(elem)
            return c.plane if c else int(cuts.kinds[elem])

        for f in cuts.scheme_faces():
            e_lo, e_hi = mesh.face_neighbors(int(f))
            rect = mesh.face_rect(int(f))
            axis = rect[0]
            e_in = e_lo if e_lo >= 0 else e_hi
            if e_lo >= 0 and e_hi >= 0:
                fr = face_rule(rect, trace_plane(e_lo), trace_plane(e_hi),
                               face_degree)
                v_lo, q_lo = traces.values_and_flux(e_lo, fr.points,
                                                    fr.side_left, axis)
                v_hi, q_hi = traces.values_and_flux(e_hi, fr.points,
                                                    fr.side_right, axis)
                d_lo = values[mesh.element_nodes(e_lo)]
                d_hi = values[mesh.element_nodes(e_hi)]
                jump = v_hi @ d_hi - v_lo @ d_lo
                flux_h = 0.5 * (q_lo @ d_lo + q_hi @ d_hi)
            else:
                fr = face_rule(rect, trace_plane(e_in), trace_plane(e_in),
                               face_degree)
                v_in, q_in = traces.values_and_flux(e_in, fr.points,
                                                    fr.side_left, axis)
                d_in = values[mesh.element_nodes(e_in)]
                jump = None               # boundary data is the ghost trace
                flux_h = q_in @ d_in
            ex, pm = _exact_at(fr.points, field, u_minus, u_plus)
            if jump is None:
                jump = ex - v_in @ d_in
            gx = _exact_grad_at(fr.points, pm, grad_minus, grad_plus)
            flux_x = np.where(pm, bm, bp) * gx[:, axis]
            energy_sq += sigma_over_h * float(fr.weights @ jump**2)
            energy_sq += h_over_sigma * float(
                fr.weights @ (flux_h - flux_x)**2)
        e_energy = float(np.sqrt(energy_sq))

    return ErrorReport(N=int(max(mesh.shape)), h=mesh.h, e_inf=e_inf,
                       e_0=float(np.sqrt(e0_sq)), e_1=float(np.sqrt(e1_sq)),
                       e_energy=e_energy)


def convergence_rates(reports) -> dict:
    """Least-squares slopes of log(error) vs log(h), one per norm.

    Norms with a nonpositive entry (exactly recovered solutions) come
    back as nan since a log fit is meaningless there.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("need at least two reports to regress")
    h = np.asarray([r.h for r in reports], dtype=float)
    if len(np.unique(h)) != len(h):
        raise ValueError("mesh sizes must be distinct")
    out = {}
    for name in ("e_inf", "e_0", "e_1", "e_energy"):
        errs = [getattr(r, name) for r in reports]
        if any(v is None for v in errs):
            continue
        errs = np.asarray(errs, dtype=float)
        if np.any(errs <= 0):
            out[name] = float("nan")
            continue
        out[name] = float(np.polyfit(np.log(h), np.log(errs), 1)[0])
    return out


def _quad_forms(C, G):
    return np.einsum("ri,ij,rj->r", C, G, C)


def inequality_probe(mesh: Mesh, cuts: MeshCuts, bases: IFEBasisSet,
                     kind: str, n_functions: int = 100,
                     max_elements: int | None = None, rng=None,
                     degree: int = 4) -> float:
    """Worst observed ratio of the named inequality over random immersed
    functions on (a sample of) the interface elements.

    kind 'trace':  min over the plain/beta-weighted forms of
                   ||(beta) grad phi . n||_F / (h^-1/2 ||(beta) grad phi||_T),
                   maximized over the six element faces;
    kind 'inverse': ||grad phi||_T * h * (beta-/beta+) / ||phi||_T;
    kind 'interface-jump':
                   ||[phi]||_{Gamma cap T} * beta- /
                   (sqrt(beta+) h^{3/2} ||sqrt(beta) grad phi||_T).
    """
    if kind not in ("trace", "inverse", "interface-jump"):
        raise ValueError(f"unknown probe kind {kind!r}")
    rng = np.random.default_rng(rng)
    bm, bp = bases.betas
    elems = np.asarray(sorted(cuts.cuts))
    if max_elements is not None and len(elems) > max_elements:
        elems = rng.choice(elems, size=max_elements, replace=False)
    h = mesh.h
    C = rng.uniform(-1.0, 1.0, size=(n_functions, 8))
    worst = 0.0
    tiny = 1e-300
    for e in elems:
        e = int(e)
        cut = cuts.cuts[e]
        lo, hi = mesh.element_box(e)
        basis = bases.basis(e)
        cells = tessellate_cut(lo, hi, cut.plane)
        Gv = np.zeros((8, 8))       # ||grad phi||^2
        Gv_b = np.zeros((8, 8))     # ||sqrt(beta) grad phi||^2
        Gv_bb = np.zeros((8, 8))    # ||beta grad phi||^2
        Gm = np.zeros((8, 8))       # ||phi||^2
        for side, beta in ((-1, bm), (1, bp)):
            rule = volume_rule(cells, side, degree=degree)
            if rule.n == 0:
                continue
            g = basis.grad_all(rule.points, side)
            gram = np.einsum("q,qai,qaj->ij", rule.weights, g, g)
            Gv += gram
            Gv_b += beta * gram
            Gv_bb += beta * beta * gram
            v = basis.eval_all(rule.points, side)
            Gm += (rule.weights[:, None] * v).T @ v
        if kind == "inverse":
            num = _quad_forms(C, Gv)
            den = _quad_forms(C, Gm)
            ratio = np.sqrt(num / np.maximum(den, tiny)) * h * (bm / bp)
            worst = max(worst, float(np.max(ratio)))
            continue
        if kind == "interface-jump":
            sr = surface_rule(lo, hi, cut.plane, cuts.field, degree=degree)
            jrow = basis.eval_all(sr.points, 1) - basis.eval_all(sr.points, -1)
            Gj = (sr.weights[:, None] * jrow).T @ jrow
            num = _quad_forms(C, Gj)
            den = _quad_forms(C, Gv_b)
            ratio = (np.sqrt(num / np.maximum(den, tiny))
                     * bm / (np.sqrt(bp) * h**1.5))
            worst = max(worst, float(np.max(ratio)))
            continue
        den_plain = np.maximum(_quad_forms(C, Gv), tiny)
        den_beta = np.maximum(_quad_forms(C, Gv_bb), tiny)
        for f in mesh.element_faces(e):
            rect = mesh.face_rect(int(f))
            axis = rect[0]
            fr = face_rule(rect, cut.plane, cut.plane, degree)
            Bf = np.zeros((8, 8))
            Bf_b = np.zeros((8, 8))
            for side, beta in ((-1, bm), (1, bp)):
                m = fr.side_left == side
                if not np.any(m):
                    continue
                r = basis.grad_all(fr.points[m], side)[:, axis, :]
                gram = (fr.weights[m, None] * r).T @ r
                Bf += gram
                Bf_b += beta * beta * gram
            # squared ratio carries the h^{-1/2} scaling: |.|_F^2 * h / |.|_T^2
            r_plain = h * _quad_forms(C, Bf) / den_plain
            r_beta = h * _quad_forms(C, Bf_b) / den_beta
            ratio = np.sqrt(np.minimum(r_plain, r_beta))
            worst = max(worst, float(np.max(ratio)))
    return worst
