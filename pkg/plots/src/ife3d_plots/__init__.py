"""Plots for solver output files: log-log convergence panels from
errors.csv tables and slice heatmaps from legacy-VTK nodal fields.
File formats are the only coupling to the solver package."""

from .convergence import (ConvergencePlot, build_convergence_figure,
                          plot_convergence, regression_slope)
from .readers import (ConvergenceTable, EmptyTableError, ReaderError,
                      StructuredGrid, read_errors_csv, read_vtk)
from .slices import DomainError, SlicePlot, extract_slice, plot_slices

__all__ = [
    "ConvergencePlot", "ConvergenceTable", "DomainError",
    "EmptyTableError", "ReaderError", "SlicePlot", "StructuredGrid",
    "build_convergence_figure", "extract_slice", "plot_convergence",
    "plot_slices", "read_errors_csv", "read_vtk", "regression_slope",
]
