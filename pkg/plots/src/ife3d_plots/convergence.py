"""Log-log convergence panels with annotated regression slopes."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import ConvergenceTable, read_errors_csv

PANELS = (("e_inf", r"$L^\infty$ error"),
          ("e_0", r"$L^2$ error"),
          ("e_1", r"$H^1$ error"))


def regression_slope(h: np.ndarray, e: np.ndarray) -> float:
    """Least-squares slope of log(e) against log(h)."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(e, dtype=float)
    if len(h) < 2:
        raise ValueError("need at least two meshes to regress a slope")
    if np.any(e <= 0):
        raise ValueError("nonpositive errors cannot be log-regressed")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


@dataclass(frozen=True)
class ConvergencePlot:
    """What one plot-convergence invocation produced."""
    files: tuple[str, ...]
    labels: tuple[str, ...]
    slopes: tuple[dict, ...]            # one {norm: slope} per table


def _reference_lines(ax, h, anchor):
    """Dashed h^1 and h^2 guides through the coarsest-mesh anchor."""
    h = np.asarray(h, dtype=float)
    hs = np.array([h.min(), h.max()])
    for order, style in ((1, ":"), (2, "--")):
        scale = anchor / h.max() ** order
        ax.loglog(hs, scale * hs ** order, style, color="0.5", lw=1.0,
                  label=f"$h^{order}$")


def build_convergence_figure(tables, labels, *, style_seed: int = 0):
    """Three log-log panels (one per norm); returns (figure, slopes)."""
    if not tables:
        raise ValueError("no tables to plot")
    if len(labels) != len(tables):
        raise ValueError("one label per table required")
    plt.rcParams["svg.hashsalt"] = str(style_seed)
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.8), dpi=140)
    slopes = []
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for t_idx, (table, label) in enumerate(zip(tables, labels)):
        per_norm = {}
        for ax, (norm, title) in zip(axes, PANELS):
            e = table.norm(norm)
            slope = regression_slope(table.h, e)
            per_norm[norm] = slope
            color = colors[t_idx % len(colors)]
            ax.loglog(table.h, e, "o-", color=color, ms=4.5,
                      label=f"{label} (slope {slope:.2f})")
        slopes.append(per_norm)
    for ax, (norm, title) in zip(axes, PANELS):
        anchor = max(t.norm(norm).max() for t in tables)
        _reference_lines(ax, np.concatenate([t.h for t in tables]), anchor)
        ax.set_title(title)
        ax.set_xlabel("$h$")
        ax.grid(True, which="both", alpha=0.25)
        ax.legend(fontsize=8)
    axes[0].set_ylabel("error")
    fig.tight_layout()
    return fig, slopes


def plot_convergence(csv_paths, labels=None, *, out_dir=".",
                     stem="convergence", fmt="png",
                     style_seed: int = 0) -> ConvergencePlot:
    """Render the panels for one or more errors.csv files.

    Labels default to the file stems.  Returns the written file names
    and the annotated slopes, one dict per input table.
    """
    csv_paths = [str(p) for p in csv_paths]
    tables = [read_errors_csv(p) for p in csv_paths]
    if labels is None:
        labels = [Path(p).parent.name or Path(p).stem for p in csv_paths]
    labels = [str(l) for l in labels]
    fig, slopes = build_convergence_figure(tables, labels,
                                           style_seed=style_seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{stem}.{fmt}"
    save_deterministic(fig, target)
    plt.close(fig)
    return ConvergencePlot(files=(str(target),), labels=tuple(labels),
                           slopes=tuple(slopes))


def save_deterministic(fig, target):
    """Write the figure without wall-clock metadata, so identical
    inputs produce identical bytes."""
    target = Path(target)
    fmt = target.suffix.lstrip(".").lower()
    metadata = {"Date": None} if fmt == "svg" else None
    if fmt == "png":
        metadata = {"Software": "ife3d-plots"}
    fig.savefig(target, format=fmt, metadata=metadata)
