"""End-to-end guarantees of the plotting component, one line each."""
from pathlib import Path

import pytest

from ife3d_plots import (plot_convergence, plot_slices, read_errors_csv,
                         regression_slope)


def _line(name: str, ok: bool, detail: str):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def test_convergence_panels_and_slopes(ex2_dir, tmp_path):
    table = read_errors_csv(ex2_dir / "errors.csv")
    res = plot_convergence([ex2_dir / "errors.csv"], ["sphere"],
                           out_dir=tmp_path)
    deltas = {}
    for norm in ("e_inf", "e_0", "e_1"):
        independent = regression_slope(table.h, table.norm(norm))
        deltas[norm] = abs(res.slopes[0][norm] - independent)
    made = Path(res.files[0]).exists()
    ok = made and len(res.slopes[0]) == 3 and max(deltas.values()) <= 0.01
    _line("convergence panels", ok,
          "three annotated panels; slope drift vs csv regression "
          + ", ".join(f"{k} {v:.1e}" for k, v in deltas.items())
          + " <= 0.01")
    assert made
    assert max(deltas.values()) <= 0.01


def test_slice_images(ex2_dir, tmp_path):
    res = plot_slices(ex2_dir / "solution.vtk", "y", [-0.7, 0.0, 0.7],
                      out_dir=tmp_path)
    made = [Path(f).exists() for f in res.files]
    ok = len(res.files) == 3 and all(made)
    _line("slice heatmaps", ok,
          f"y in {{-0.7, 0, 0.7}} emitted {sum(made)} images, "
          f"shared scale [{res.vmin:.3g}, {res.vmax:.3g}]")
    assert ok
