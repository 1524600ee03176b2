"""Runner surface: config parsing and validation, the benchmark
sweeps, output files (each round-tripped through a reader fixture
here), rerun determinism, and exit codes."""
import numpy as np
import pytest

from ife3d.cli import (ConfigError, RunConfig, load_config, main,
                       run_example, run_stats, run_sweep)
from ife3d.errors import ERRORS_CSV_HEADER


# -- reader fixtures ---------------------------------------------------

def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        assert len(cells) == len(header)
        rows.append({k: float(v) for k, v in zip(header, cells)})
    return header, rows


def read_obj(path):
    verts, faces = [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts or parts[0] == "#":
            continue
        if parts[0] == "v":
            verts.append([float(t) for t in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(t) - 1 for t in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=int)


def read_vtk(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    dims = tuple(int(t) for t in lines[4].split()[1:])
    origin = np.array([float(t) for t in lines[5].split()[1:]])
    spacing = np.array([float(t) for t in lines[6].split()[1:]])
    n = int(lines[7].split()[1])
    assert lines[8].split()[0] == "SCALARS"
    values = np.array([float(t) for t in lines[10:10 + n]])
    return dims, origin, spacing, values


# -- config parsing ----------------------------------------------------

def write_cfg(tmp_path, body):
    p = tmp_path / "run.ini"
    p.write_text(body)
    return p


def test_minimal_config(tmp_path):
    cfg = load_config(write_cfg(tmp_path, """
[mesh]
n = 4
[solution]
exact = plane
"""))
    assert cfg.n_list == (4,)
    assert cfg.exact == "plane"
    assert cfg.epsilon == -1.0 and cfg.sigma0 == 10.0
    assert cfg.boundary == "exact"


def test_config_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="mesh.size"):
        load_config(write_cfg(tmp_path, "[mesh]\nn = 4\nsize = 2\n"))


def test_config_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"\[extras\]"):
        load_config(write_cfg(tmp_path, "[mesh]\nn = 4\n[extras]\nx = 1\n"))


def test_config_bad_epsilon_names_field(tmp_path):
    with pytest.raises(ConfigError, match="scheme.epsilon"):
        load_config(write_cfg(tmp_path, """
[mesh]
n = 4
[scheme]
epsilon = 2
[solution]
exact = plane
"""))


def test_config_requires_increasing_n():
    with pytest.raises(ConfigError, match="mesh.n"):
        RunConfig(n_list=(8, 4), exact="plane")


def test_config_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/run.ini")


def test_config_custom_needs_interface():
    with pytest.raises(ConfigError, match="interface.kind"):
        RunConfig(n_list=(4,), exact="none", boundary="zero")


def test_config_boundary_exact_needs_exact():
    with pytest.raises(ConfigError, match="solution.boundary"):
        RunConfig(n_list=(4,), exact="none", interface="sphere",
                  boundary="exact",
                  domain=None)


def test_config_preset_rejects_geometry_sections(tmp_path):
    with pytest.raises(ConfigError, match="interface"):
        load_config(write_cfg(tmp_path, """
[mesh]
n = 4
[solution]
exact = sphere
[interface]
kind = sphere
"""))


def test_config_cloud_needs_path():
    with pytest.raises(ConfigError, match="interface.path"):
        RunConfig(n_list=(4,), exact="none", interface="cloud",
                  boundary="zero")


# -- sweeps through the public API --------------------------------------

@pytest.fixture()
def quiet():
    lines = []
    return lines, lines.append


def test_example1_recovers_exact(tmp_path, quiet):
    lines, echo = quiet
    reports = run_example(1, n_list=(4, 8), out=str(tmp_path), echo=echo)
    assert len(reports) == 2
    header, rows = read_csv(tmp_path / "errors.csv")
    assert ",".join(header) == ERRORS_CSV_HEADER
    for row in rows:
        for col in ("e_inf", "e_0", "e_1"):
            assert row[col] <= 1e-10
        # energy amplifies the solver residual by sqrt(sigma/h)
        assert row["e_energy"] <= 1e-9
    assert any(line.startswith("rates:") for line in lines)


def test_example2_two_rows_and_rates(tmp_path, quiet):
    lines, echo = quiet
    reports = run_example(2, n_list=(8, 16), out=str(tmp_path), echo=echo)
    assert len(reports) == 2
    _, rows = read_csv(tmp_path / "errors.csv")
    assert len(rows) == 2
    assert rows[0]["e_0"] > rows[1]["e_0"] > 0
    assert any(line.startswith("rates:") for line in lines)
    # all four export files written
    for name in ("errors.csv", "stats.csv", "tau.obj", "solution.vtk"):
        assert (tmp_path / name).exists()


def test_example4_reference_mode(tmp_path, quiet):
    lines, echo = quiet
    reports = run_example(4, n_list=(8, 16), synthetic=True,
                          out=str(tmp_path), echo=echo)
    assert len(reports) == 1  # finest row is the reference
    _, rows = read_csv(tmp_path / "errors.csv")
    assert len(rows) == 2
    assert np.isfinite(rows[0]["e_0"]) and rows[0]["e_0"] > 0
    assert np.isnan(rows[1]["e_0"])
    assert np.isfinite(rows[1]["assembly_s"])


def test_example4_needs_cloud_flag(tmp_path):
    with pytest.raises(ConfigError, match="--cloud|--synthetic"):
        run_example(4, n_list=(4,), out=str(tmp_path), echo=lambda s: None)


def test_example2_rejects_beta_override(tmp_path):
    with pytest.raises(ConfigError, match="fixed coefficients"):
        run_example(2, n_list=(4,), beta_minus=2.0, out=str(tmp_path),
                    echo=lambda s: None)


def test_cloud_example_from_file(tmp_path, quiet):
    from ife3d.pointcloud import fibonacci_sphere_cloud
    cloud = fibonacci_sphere_cloud(2000)
    path = tmp_path / "pts.xyz"
    np.savetxt(path, cloud.points)
    lines, echo = quiet
    reports = run_example(4, n_list=(8, 12), cloud_path=str(path),
                          out=str(tmp_path / "out"), echo=echo)
    assert len(reports) == 1


# -- output files ------------------------------------------------------

@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sphere-run")
    cfg = RunConfig(n_list=(8,), exact="sphere", out=str(out),
                    timings="none")
    run_sweep(cfg, echo=lambda s: None)
    return out, cfg


def test_stats_csv_consistent(sphere_run):
    out, _ = sphere_run
    header, rows = read_csv(out / "stats.csv")
    row = rows[0]
    kinds = (row["tri"] + row["quad_parallel"] + row["quad_adjacent"]
             + row["penta"] + row["hexa"])
    assert kinds == row["n_interface"]
    assert row["interface_element_pct"] == pytest.approx(
        row["n_interface"] / row["n_elements"], abs=0)
    assert row["n_elements"] == 8**3


def test_obj_roundtrip(sphere_run):
    out, _ = sphere_run
    verts, faces = read_obj(out / "tau.obj")
    assert len(faces) > 0
    assert faces.min() >= 0 and faces.max() < len(verts)
    assert np.all(verts >= -1 - 1e-12) and np.all(verts <= 1 + 1e-12)
    # triangle soup of plane sections: every polygon gives >= 1 triangle
    _, rows = read_csv(out / "stats.csv")
    assert len(faces) >= rows[0]["n_interface"]


def test_vtk_roundtrip(sphere_run):
    out, _ = sphere_run
    dims, origin, spacing, values = read_vtk(out / "solution.vtk")
    assert dims == (9, 9, 9)
    assert np.allclose(origin, [-1, -1, -1], atol=0)
    assert np.allclose(spacing, 0.25, atol=0)
    assert len(values) == 9**3
    assert np.all(np.isfinite(values))
    # VTK point order is x-fastest, matching node ids: corner checks
    from ife3d.problems import sphere_problem
    prob = sphere_problem()
    corner_exact = prob.u_plus(np.array([[-1.0, -1.0, -1.0]]))[0]
    assert abs(values[0] - corner_exact) < 1e-9  # Dirichlet node


def test_rerun_byte_identical(tmp_path):
    cfg = RunConfig(n_list=(4, 6), exact="plane", out=str(tmp_path),
                    timings="none")
    run_sweep(cfg, echo=lambda s: None)
    first = {n: (tmp_path / n).read_bytes()
             for n in ("errors.csv", "stats.csv", "tau.obj",
                       "solution.vtk", "error.vtk")}
    run_sweep(cfg, echo=lambda s: None)
    for name, blob in first.items():
        assert (tmp_path / name).read_bytes() == blob, name


def test_default_timings_vary_only_in_timing_columns(tmp_path):
    cfg = RunConfig(n_list=(4,), exact="plane", out=str(tmp_path))
    run_sweep(cfg, echo=lambda s: None)
    _, rows1 = read_csv(tmp_path / "errors.csv")
    run_sweep(cfg, echo=lambda s: None)
    _, rows2 = read_csv(tmp_path / "errors.csv")
    for a, b in zip(rows1, rows2):
        for col in a:
            if col in ("assembly_s", "solve_s"):
                continue
            assert a[col] == b[col], col


def test_stats_command(tmp_path, quiet):
    lines, echo = quiet
    rows = run_stats("sphere", (6, 12), out=str(tmp_path), echo=echo)
    assert len(rows) == 2
    assert rows[1]["interface_element_pct"] < rows[0]["interface_element_pct"]
    assert (tmp_path / "stats.csv").exists()


# -- entry point -------------------------------------------------------

def test_main_exit_codes(tmp_path):
    assert main(["run", "/nonexistent/cfg.ini"]) == 2
    assert main(["example", "4", "--n", "4", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[mesh]\nn = 4\n[scheme]\nepsilon = 2\n"
                   "[solution]\nexact = plane\n")
    assert main(["run", str(bad)]) == 2


def test_main_runs_example(tmp_path, capsys):
    assert main(["example", "1", "--n", "4", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "interface elements" in out
    assert (tmp_path / "errors.csv").exists()
