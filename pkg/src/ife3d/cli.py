"""Command-line runner: benchmark experiments, config-driven custom
runs, and interface statistics.

Outputs per run directory: errors.csv (one row per mesh), stats.csv
(element classification counts), tau.obj (triangle soup of the fitted
interface planes, finest mesh), solution.vtk (nodal field on the
finest mesh, legacy ASCII structured points), and error.vtk (nodal
error magnitude, finest mesh) whenever the exact solution is known.

Experiments:
  1  piecewise-linear solution across a tilted plane (errors hit
     solver tolerance on every mesh);
  2  sphere interface with a manufactured curved solution;
  3  orthocircle (three interlocked rings), large coefficient jump;
  4  point-cloud geometry: signed distance from an xyz file (--cloud)
     or from a built-in synthetic sphere sample (--synthetic); no
     exact solution, so errors are measured against the run on the
     finest mesh (reference mode).

Config files are INI; see RunConfig for the grammar.  Reruns with the
same config write byte-identical CSVs apart from the two wall-clock
columns; set timings = none to pin those as well.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .cuts import MeshCuts, classify_mesh
from .errors import (ERRORS_CSV_HEADER, ErrorReport, FESolution,
                     convergence_rates, errors_csv_row, norm_errors)
from .levelset import orthocircle_field, plane_field, sphere_field
from .mesh import BoxDomain, Mesh, build_mesh
from .pointcloud import (PointCloud, fibonacci_sphere_cloud, load_cloud,
                         signed_distance)
from .problems import (PRESETS, InterfaceProblem, RunResult, plane_problem,
                       run_on_mesh)
from .quadrature import plane_section_polygon

__all__ = ["ConfigError", "RunConfig", "load_config", "run_config",
           "run_example", "report_interface_stats", "write_errors_csv",
           "write_stats_csv", "write_interface_obj", "write_solution_vtk",
           "main"]

STATS_CSV_HEADER = ("N,h,n_elements,n_interface,interface_element_pct,"
                    "tri,quad_parallel,quad_adjacent,penta,hexa")

_KIND_COLUMNS = ("tri", "quad-parallel", "quad-adjacent", "penta", "hexa")

EXAMPLE_N = {1: (10, 20), 2: (10, 20, 40), 3: (20, 40, 60), 4: (16, 32, 64)}


class ConfigError(ValueError):
    """Bad run configuration; the message names the offending key."""


# ---------------------------------------------------------------------
# configuration

_SECTIONS = {
    "domain": {"lo", "hi"},
    "mesh": {"n"},
    "interface": {"kind", "normal", "offset", "center", "radius", "width",
                  "path"},
    "material": {"beta_minus", "beta_plus"},
    "scheme": {"epsilon", "sigma0", "quadrature", "subsample"},
    "solution": {"exact", "boundary", "reference"},
    "solver": {"tol", "max_iter"},
    "run": {"out", "seed", "threads", "timings"},
}


@dataclass(frozen=True)
class RunConfig:
    """One sweep: a geometry, a coefficient pair, scheme parameters,
    and a list of mesh resolutions.

    INI grammar (defaults in parentheses; vectors are whitespace
    separated)::

        [mesh]      n = 10 20 40          # required, strictly increasing
        [solution]  exact = plane|sphere|orthocircle|none (none)
                    boundary = exact|zero|linear   # g when exact = none
                    reference = none|finest (none) # error reference
        [interface] kind = plane|sphere|orthocircle|cloud
                    normal/offset | center/radius | width | path
        [domain]    lo = x y z ; hi = x y z
        [material]  beta_minus (1), beta_plus (10)
        [scheme]    epsilon (-1), sigma0 (10), quadrature plane|levelset,
                    subsample (4)
        [solver]    tol (1e-10), max_iter (0 = automatic)
        [run]       out (out), seed (0), threads (0), timings wall|none

    A named exact solution brings its own geometry, domain, and (for
    the curved presets) coefficients, so those sections stay empty;
    with exact = none an [interface] section is required and the right
    side is f = 0 with g chosen by `boundary`.
    """

    n_list: tuple[int, ...]
    exact: str = "none"
    boundary: str = "exact"
    reference: str = "none"
    interface: str | None = None
    interface_params: dict = dc_field(default_factory=dict)
    domain: BoxDomain | None = None
    beta_minus: float = 1.0
    beta_plus: float = 10.0
    epsilon: float = -1.0
    sigma0: float = 10.0
    quadrature: str = "plane"
    subsample: int = 4
    tol: float = 1e-10
    max_iter: int = 0
    out: str = "out"
    seed: int = 0
    threads: int = 0
    timings: str = "wall"

    def __post_init__(self):
        ns = self.n_list
        if not ns or any(int(n) < 2 for n in ns) or \
                any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(
                "mesh.n: need a strictly increasing list of integers >= 2")
        if self.exact not in ("none", *PRESETS):
            raise ConfigError(f"solution.exact: unknown name {self.exact!r}")
        if self.boundary not in ("exact", "zero", "linear"):
            raise ConfigError(
                f"solution.boundary: {self.boundary!r} is not one of "
                f"exact, zero, linear")
        if self.reference not in ("none", "finest"):
            raise ConfigError(
                f"solution.reference: {self.reference!r} is not one of "
                f"none, finest")
        if self.epsilon not in (-1.0, 0.0, 1.0):
            raise ConfigError("scheme.epsilon: must be -1, 0 or 1")
        if self.sigma0 <= 0:
            raise ConfigError("scheme.sigma0: must be positive")
        if self.quadrature not in ("plane", "levelset"):
            raise ConfigError(
                "scheme.quadrature: must be 'plane' or 'levelset'")
        if self.beta_minus <= 0 or self.beta_plus <= 0:
            raise ConfigError("material.beta_*: must be positive")
        if self.tol <= 0:
            raise ConfigError("solver.tol: must be positive")
        if self.timings not in ("wall", "none"):
            raise ConfigError("run.timings: must be 'wall' or 'none'")
        if self.exact != "none":
            if self.interface is not None:
                raise ConfigError(
                    "interface: not allowed when solution.exact names a "
                    "preset (the geometry comes with it)")
            if self.domain is not None:
                raise ConfigError(
                    "domain: not allowed when solution.exact names a "
                    "preset")
            if self.reference == "finest":
                raise ConfigError(
                    "solution.reference: finest conflicts with an exact "
                    "solution")
            if self.exact in ("sphere", "orthocircle") and \
                    (self.beta_minus, self.beta_plus) != (1.0, 10.0):
                raise ConfigError(
                    f"material.beta_*: fixed by the {self.exact} preset; "
                    f"drop the [material] section")
        else:
            if self.interface is None:
                raise ConfigError(
                    "interface.kind: required when solution.exact = none")
            if self.interface not in ("plane", "sphere", "orthocircle",
                                      "cloud"):
                raise ConfigError(
                    f"interface.kind: unknown kind {self.interface!r}")
            if self.boundary == "exact":
                raise ConfigError(
                    "solution.boundary: 'exact' needs a named exact "
                    "solution; use zero or linear")
            if self.domain is None and self.interface != "cloud":
                raise ConfigError(
                    "domain: required for analytic interfaces without an "
                    "exact preset")
            if self.interface == "cloud" and \
                    "path" not in self.interface_params and \
                    "cloud" not in self.interface_params:
                raise ConfigError("interface.path: required for kind cloud")


def _parse_floats(text: str, n: int, key: str) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(parts)}")
    try:
        return tuple(float(t) for t in parts)
    except ValueError:
        raise ConfigError(f"{key}: could not parse {text!r}") from None


def _parse_scalar(text: str, key: str, cast=float):
    try:
        return cast(text)
    except ValueError:
        raise ConfigError(f"{key}: could not parse {text!r}") from None


def load_config(path) -> RunConfig:
    """Parse and validate an INI run configuration."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    kw: dict = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
    if cp.has_option("mesh", "n"):
        parts = cp["mesh"]["n"].split()
        try:
            kw["n_list"] = tuple(int(t) for t in parts)
        except ValueError:
            raise ConfigError(f"mesh.n: could not parse "
                              f"{cp['mesh']['n']!r}") from None
    else:
        raise ConfigError("mesh.n: required")
    if cp.has_section("domain"):
        lo = _parse_floats(cp["domain"].get("lo", ""), 3, "domain.lo")
        hi = _parse_floats(cp["domain"].get("hi", ""), 3, "domain.hi")
        kw["domain"] = BoxDomain(lo, hi)
    if cp.has_section("interface"):
        sec = cp["interface"]
        kind = sec.get("kind")
        if kind is None:
            raise ConfigError("interface.kind: required in [interface]")
        kw["interface"] = kind
        params: dict = {}
        if "normal" in sec:
            params["normal"] = _parse_floats(sec["normal"], 3,
                                             "interface.normal")
        if "offset" in sec:
            params["offset"] = _parse_scalar(sec["offset"],
                                             "interface.offset")
        if "center" in sec:
            params["center"] = _parse_floats(sec["center"], 3,
                                             "interface.center")
        if "radius" in sec:
            params["radius"] = _parse_scalar(sec["radius"],
                                             "interface.radius")
        if "width" in sec:
            params["width"] = _parse_scalar(sec["width"], "interface.width")
        if "path" in sec:
            params["path"] = sec["path"]
        kw["interface_params"] = params
    g = cp.get
    if cp.has_option("material", "beta_minus"):
        kw["beta_minus"] = _parse_scalar(g("material", "beta_minus"),
                                         "material.beta_minus")
    if cp.has_option("material", "beta_plus"):
        kw["beta_plus"] = _parse_scalar(g("material", "beta_plus"),
                                        "material.beta_plus")
    if cp.has_option("scheme", "epsilon"):
        kw["epsilon"] = _parse_scalar(g("scheme", "epsilon"),
                                      "scheme.epsilon")
    if cp.has_option("scheme", "sigma0"):
        kw["sigma0"] = _parse_scalar(g("scheme", "sigma0"), "scheme.sigma0")
    if cp.has_option("scheme", "quadrature"):
        kw["quadrature"] = g("scheme", "quadrature")
    if cp.has_option("scheme", "subsample"):
        kw["subsample"] = _parse_scalar(g("scheme", "subsample"),
                                        "scheme.subsample", int)
    for key in ("exact", "boundary", "reference"):
        if cp.has_option("solution", key):
            kw[key] = g("solution", key)
    if "boundary" not in kw:
        kw["boundary"] = "exact" if kw.get("exact", "none") != "none" \
            else "zero"
    if cp.has_option("solver", "tol"):
        kw["tol"] = _parse_scalar(g("solver", "tol"), "solver.tol")
    if cp.has_option("solver", "max_iter"):
        kw["max_iter"] = _parse_scalar(g("solver", "max_iter"),
                                       "solver.max_iter", int)
    if cp.has_option("run", "out"):
        kw["out"] = g("run", "out")
    if cp.has_option("run", "seed"):
        kw["seed"] = _parse_scalar(g("run", "seed"), "run.seed", int)
    if cp.has_option("run", "threads"):
        kw["threads"] = _parse_scalar(g("run", "threads"), "run.threads",
                                      int)
    if cp.has_option("run", "timings"):
        kw["timings"] = g("run", "timings")
    return RunConfig(**kw)


# ---------------------------------------------------------------------
# geometry and problem resolution

def _analytic_field(kind: str, params: dict):
    if kind == "plane":
        return plane_field(params.get("normal", (1.0, 0.0, 1.0)),
                           params.get("offset", 0.0))
    if kind == "sphere":
        return sphere_field(params.get("center", (0.0, 0.0, 0.0)),
                            params.get("radius", 0.5))
    if kind == "orthocircle":
        return orthocircle_field(params.get("width", 0.075))
    raise ConfigError(f"interface.kind: unknown kind {kind!r}")


def _boundary_g(kind: str):
    if kind == "zero":
        return lambda p: np.zeros(np.atleast_2d(p).shape[0])
    if kind == "linear":
        return lambda p: np.atleast_2d(p).sum(axis=1)
    raise ConfigError(f"solution.boundary: unknown kind {kind!r}")


def _zero_f(p):
    return np.zeros(np.atleast_2d(p).shape[0])


def _cloud_domain(cloud: PointCloud) -> BoxDomain:
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    pad = 0.25 * (hi - lo)
    return BoxDomain(tuple(lo - pad), tuple(hi + pad))


class _SweepPlan:
    """Resolved geometry/problem factory for one config."""

    def __init__(self, cfg: RunConfig, cloud: PointCloud | None = None):
        self.cfg = cfg
        self.cloud = cloud
        if cfg.exact != "none":
            if cfg.exact == "plane":
                self.problem = plane_problem(cfg.beta_minus, cfg.beta_plus)
            else:
                self.problem = PRESETS[cfg.exact]()
            self.domain = self.problem.domain
            return
        self.problem = None
        if cfg.interface == "cloud":
            if self.cloud is None:
                path = cfg.interface_params.get("path")
                self.cloud = load_cloud(path)
            self.domain = cfg.domain or _cloud_domain(self.cloud)
        else:
            self.domain = cfg.domain

    def problem_on(self, mesh: Mesh) -> InterfaceProblem:
        cfg = self.cfg
        if self.problem is not None:
            return self.problem
        if cfg.interface == "cloud":
            field = signed_distance(self.cloud, mesh)
            strict = False
        else:
            field = _analytic_field(cfg.interface, cfg.interface_params)
            strict = cfg.interface != "orthocircle"
        return InterfaceProblem(
            name=f"custom-{cfg.interface}", domain=self.domain, field=field,
            beta_minus=cfg.beta_minus, beta_plus=cfg.beta_plus,
            f_minus=_zero_f, f_plus=_zero_f, g=_boundary_g(cfg.boundary),
            strict_hypotheses=strict)


# ---------------------------------------------------------------------
# writers

def write_errors_csv(path, rows):
    """rows: (report_or_None, N, h, assembly_s, solve_s, pct)."""
    with open(path, "w") as fh:
        fh.write(ERRORS_CSV_HEADER + "\n")
        for report, n, h, asm, slv, pct in rows:
            fh.write(errors_csv_row(report, N=n, h=h, assembly_s=asm,
                                    solve_s=slv, interface_pct=pct) + "\n")


def report_interface_stats(mesh: Mesh, cuts: MeshCuts) -> dict:
    """Counts per cut shape plus the interface-element fraction."""
    counts = cuts.kind_counts()
    n_int = len(cuts.cuts)
    row = {"N": int(mesh.shape[0]), "h": float(mesh.h),
           "n_elements": int(mesh.n_elements), "n_interface": n_int,
           "interface_element_pct": n_int / mesh.n_elements}
    for kind in _KIND_COLUMNS:
        row[kind.replace("-", "_")] = counts[kind]
    return row


def write_stats_csv(path, stat_rows):
    with open(path, "w") as fh:
        fh.write(STATS_CSV_HEADER + "\n")
        for row in stat_rows:
            cells = [str(row["N"]), format(row["h"], ".17g"),
                     str(row["n_elements"]), str(row["n_interface"]),
                     format(row["interface_element_pct"], ".17g")]
            cells += [str(row[k.replace("-", "_")]) for k in _KIND_COLUMNS]
            fh.write(",".join(cells) + "\n")


def write_interface_obj(path, mesh: Mesh, cuts: MeshCuts):
    """Triangle soup of every fitted plane section, fan-triangulated."""
    verts, faces = [], []
    for e in sorted(cuts.cuts):
        lo, hi = mesh.element_box(e)
        poly = plane_section_polygon(lo, hi, cuts.cuts[e].plane)
        base = len(verts) + 1  # OBJ indices are 1-based
        verts.extend(poly)
        for i in range(1, len(poly) - 1):
            faces.append((base, base + i, base + i + 1))
    with open(path, "w") as fh:
        fh.write("# interface plane sections\n")
        for v in verts:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in faces:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def write_solution_vtk(path, mesh: Mesh, values: np.ndarray,
                       name: str = "u"):
    """Legacy ASCII structured-points file with one nodal scalar."""
    mx, my, mz = mesh.node_shape
    lo = np.asarray(mesh.domain.lo)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("nodal solution\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {mx} {my} {mz}\n")
        fh.write(f"ORIGIN {lo[0]:.17g} {lo[1]:.17g} {lo[2]:.17g}\n")
        fh.write(f"SPACING {mesh.spacing[0]:.17g} {mesh.spacing[1]:.17g} "
                 f"{mesh.spacing[2]:.17g}\n")
        fh.write(f"POINT_DATA {mesh.n_nodes}\n")
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in values:
            fh.write(f"{v:.17g}\n")


# ---------------------------------------------------------------------
# sweeps

def _measure(problem: InterfaceProblem, res: RunResult,
             reference: FESolution | None) -> ErrorReport | None:
    if problem.has_exact:
        return norm_errors(res.values, res.mesh, res.cuts, res.bases,
                           problem.u_minus, problem.u_plus,
                           problem.grad_minus, problem.grad_plus,
                           params=res.params)
    if reference is not None:
        ref_val = lambda p: reference(p)
        ref_grad = lambda p: reference.gradient(p)
        return norm_errors(res.values, res.mesh, res.cuts, res.bases,
                           ref_val, ref_val, ref_grad, ref_grad,
                           params=res.params)
    return None


def run_sweep(cfg: RunConfig, cloud: PointCloud | None = None,
              echo=print) -> list[ErrorReport]:
    """Run every mesh in the config, write all outputs, return the
    measured error reports (possibly empty)."""
    plan = _SweepPlan(cfg, cloud)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    runs: list[tuple[InterfaceProblem, RunResult]] = []
    for n in cfg.n_list:
        mesh = build_mesh(plan.domain, (n, n, n))
        problem = plan.problem_on(mesh)
        res = run_on_mesh(problem, mesh, field=problem.field,
                          epsilon=cfg.epsilon, sigma0=cfg.sigma0,
                          tol=cfg.tol, max_iter=cfg.max_iter or None,
                          quadrature=cfg.quadrature,
                          subsample=cfg.subsample)
        echo(f"N={n}: {len(res.cuts.cuts)} interface elements, "
             f"assembly {res.assembly_seconds:.2f}s, "
             f"solve {res.solve_seconds:.2f}s")
        runs.append((problem, res))

    reference = None
    if cfg.reference == "finest":
        ref_problem, ref_res = runs[-1]
        reference = FESolution(ref_res.mesh, ref_res.cuts, ref_res.bases,
                               ref_res.values)

    rows, stat_rows, reports = [], [], []
    for i, (problem, res) in enumerate(runs):
        is_ref = reference is not None and i == len(runs) - 1
        report = None if is_ref else _measure(problem, res, reference)
        if report is not None:
            reports.append(report)
        n = res.mesh.shape[0]
        asm, slv = res.assembly_seconds, res.solve_seconds
        if cfg.timings == "none":
            asm = slv = None
        rows.append((report, n, res.mesh.h, asm, slv,
                     len(res.cuts.cuts) / res.mesh.n_elements))
        stat_rows.append(report_interface_stats(res.mesh, res.cuts))

    write_errors_csv(out / "errors.csv", rows)
    write_stats_csv(out / "stats.csv", stat_rows)
    fin_problem, finest = runs[-1]
    write_interface_obj(out / "tau.obj", finest.mesh, finest.cuts)
    write_solution_vtk(out / "solution.vtk", finest.mesh, finest.values)
    if fin_problem.has_exact:
        pts = finest.mesh.node_coords(np.arange(finest.mesh.n_nodes))
        plus = fin_problem.field(pts) >= 0.0
        exact = np.where(plus, fin_problem.u_plus(pts),
                         fin_problem.u_minus(pts))
        write_solution_vtk(out / "error.vtk", finest.mesh,
                           np.abs(finest.values - exact), name="e")

    for report in reports:
        echo(f"N={report.N}: e_inf={report.e_inf:.4e} e_0={report.e_0:.4e} "
             f"e_1={report.e_1:.4e}")
    if len(reports) >= 2:
        rates = convergence_rates(reports)
        echo("rates: " + "  ".join(f"{k}={v:.3f}" for k, v in
                                   sorted(rates.items())))
    echo(f"outputs in {out}")
    return reports


def run_config(path, echo=print) -> list[ErrorReport]:
    return run_sweep(load_config(path), echo=echo)


def run_example(example_id: int, *, n_list=None, cloud_path=None,
                synthetic: bool = False, out: str | None = None,
                echo=print, **overrides) -> list[ErrorReport]:
    """Run one of the four benchmark experiments with overrides."""
    if example_id not in EXAMPLE_N:
        raise ConfigError(f"example id must be 1..4, got {example_id}")
    n_list = tuple(n_list) if n_list else EXAMPLE_N[example_id]
    out = out or f"out-example{example_id}"
    cloud = None
    if example_id == 1:
        kw = dict(exact="plane")
        # exact-recovery benchmark: solve well below the reporting level
        overrides.setdefault("tol", 1e-12)
    elif example_id == 2:
        kw = dict(exact="sphere")
    elif example_id == 3:
        kw = dict(exact="orthocircle")
    else:
        if cloud_path:
            cloud = load_cloud(cloud_path)
            domain = None
        elif synthetic:
            cloud = fibonacci_sphere_cloud()
            domain = BoxDomain((0, 0, 0), (1, 1, 1))
        else:
            raise ConfigError(
                "example 4 needs interface data: pass --cloud PATH "
                "(xyz text file) or --synthetic for the built-in "
                "sphere sample")
        kw = dict(exact="none", interface="cloud",
                  interface_params={"cloud": "inline"}, domain=domain,
                  boundary="linear", reference="finest")
    if example_id in (2, 3):
        for b in ("beta_minus", "beta_plus"):
            if b in overrides:
                raise ConfigError(
                    f"example {example_id} has fixed coefficients; "
                    f"--{b.replace('_', '-')} only applies to examples "
                    f"1 and 4")
    cfg = RunConfig(n_list=n_list, out=out, **kw, **overrides)
    return run_sweep(cfg, cloud=cloud, echo=echo)


def run_stats(kind: str, n_list, *, out: str = "out-stats",
              cloud_path=None, synthetic: bool = False,
              echo=print) -> list[dict]:
    """Classification statistics only; no solves."""
    cloud = None
    if kind == "cloud":
        if cloud_path:
            cloud = load_cloud(cloud_path)
            domain = _cloud_domain(cloud)
        elif synthetic:
            cloud = fibonacci_sphere_cloud()
            domain = BoxDomain((0, 0, 0), (1, 1, 1))
        else:
            raise ConfigError(
                "stats on a cloud interface needs --cloud PATH or "
                "--synthetic")
    elif kind == "plane":
        domain = BoxDomain((-1, -1, -1), (1, 1, 1))
    elif kind == "sphere":
        domain = BoxDomain((-1, -1, -1), (1, 1, 1))
    elif kind == "orthocircle":
        domain = BoxDomain((-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))
    else:
        raise ConfigError(f"unknown interface kind {kind!r}")
    rows = []
    for n in n_list:
        mesh = build_mesh(domain, (n, n, n))
        if kind == "cloud":
            field = signed_distance(cloud, mesh)
            strict = False
        elif kind == "plane":
            field = plane_field((1.0, 0.0, 1.0), np.pi / 10.0 / np.sqrt(2))
            strict = True
        elif kind == "sphere":
            field = sphere_field((0.0, 0.0, 0.0), np.pi / 4.0)
            strict = True
        else:
            field = orthocircle_field()
            strict = False
        cuts = classify_mesh(mesh, field, strict=strict)
        row = report_interface_stats(mesh, cuts)
        rows.append(row)
        echo(f"N={n}: {row['n_interface']}/{row['n_elements']} interface "
             f"elements ({100 * row['interface_element_pct']:.2f}%)")
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_stats_csv(outdir / "stats.csv", rows)
    echo(f"outputs in {outdir}")
    return rows


# ---------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, nargs="+", metavar="N",
                   help="mesh resolutions (one solve per value)")
    p.add_argument("--eps", type=float, default=None,
                   help="face-term symmetry: -1 symmetric, 0, or 1")
    p.add_argument("--sigma0", type=float, default=None,
                   help="base penalty strength")
    p.add_argument("--beta-minus", type=float, default=None)
    p.add_argument("--beta-plus", type=float, default=None)
    p.add_argument("--tol", type=float, default=None,
                   help="iterative solver tolerance")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="seed recorded for randomized diagnostics")
    p.add_argument("--quadrature", choices=("plane", "levelset"),
                   default=None, help="interface quadrature mode")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (exported to BLAS/OpenMP, "
                        "used for distance queries)")
    p.add_argument("--cloud", default=None, metavar="PATH",
                   help="xyz point-cloud file (example 4 / cloud stats)")
    p.add_argument("--synthetic", action="store_true",
                   help="use the built-in synthetic sphere cloud")


def _apply_threads(threads):
    if threads and threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ife3d",
        description="Immersed trilinear finite elements for elliptic "
                    "interface problems on Cartesian meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ex = sub.add_parser("example", help="run a benchmark experiment")
    p_ex.add_argument("id", type=int, choices=(1, 2, 3, 4))
    _add_common(p_ex)

    p_run = sub.add_parser("run", help="run from an INI config file")
    p_run.add_argument("config")

    p_st = sub.add_parser("stats",
                          help="interface classification statistics")
    p_st.add_argument("interface",
                      choices=("plane", "sphere", "orthocircle", "cloud"))
    _add_common(p_st)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            run_config(args.config)
            return 0
        _apply_threads(args.threads)
        if args.command == "stats":
            run_stats(args.interface, tuple(args.n or (20, 40)),
                      out=args.out or "out-stats", cloud_path=args.cloud,
                      synthetic=args.synthetic)
            return 0
        overrides = {}
        if args.eps is not None:
            overrides["epsilon"] = args.eps
        if args.sigma0 is not None:
            overrides["sigma0"] = args.sigma0
        if args.beta_minus is not None:
            overrides["beta_minus"] = args.beta_minus
        if args.beta_plus is not None:
            overrides["beta_plus"] = args.beta_plus
        if args.tol is not None:
            overrides["tol"] = args.tol
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.quadrature is not None:
            overrides["quadrature"] = args.quadrature
        run_example(args.id, n_list=args.n, cloud_path=args.cloud,
                    synthetic=args.synthetic, out=args.out, **overrides)
        return 0
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
