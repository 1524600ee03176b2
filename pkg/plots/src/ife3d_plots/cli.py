"""Command-line front end: plot-convergence and plot-slices."""
from __future__ import annotations

import argparse
import sys

from .convergence import plot_convergence
from .readers import ReaderError
from .slices import DomainError, plot_slices


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ife3d-plots",
        description="Render convergence panels and slice heatmaps from "
                    "solver output files (errors.csv / *.vtk).")
    sub = ap.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("plot-convergence",
                          help="log-log error panels from errors.csv files")
    conv.add_argument("csv", nargs="+", help="errors.csv paths")
    conv.add_argument("--labels", nargs="*", default=None,
                      help="legend label per csv (default: directory names)")
    conv.add_argument("--out", default=".", help="output directory")
    conv.add_argument("--stem", default="convergence",
                      help="output file stem")
    conv.add_argument("--format", default="png", choices=("png", "svg"))
    conv.add_argument("--seed", type=int, default=0,
                      help="style seed pinning svg hash ids")

    sl = sub.add_parser("plot-slices",
                        help="heatmaps of axis-aligned slices of a VTK field")
    sl.add_argument("vtk", help="legacy ASCII structured-points file")
    sl.add_argument("--axis", default="y", choices=("x", "y", "z"))
    sl.add_argument("--coords", nargs="+", type=float, required=True,
                    help="slice coordinates along the axis")
    sl.add_argument("--out", default=".", help="output directory")
    sl.add_argument("--stem", default="slice", help="output file stem")
    sl.add_argument("--format", default="png", choices=("png", "svg"))
    sl.add_argument("--cmap", default="viridis")
    sl.add_argument("--seed", type=int, default=0,
                    help="style seed pinning svg hash ids")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot-convergence":
            if args.labels is not None and len(args.labels) != len(args.csv):
                print("error: need one label per csv", file=sys.stderr)
                return 2
            result = plot_convergence(args.csv, args.labels,
                                      out_dir=args.out, stem=args.stem,
                                      fmt=args.format, style_seed=args.seed)
            for label, per_norm in zip(result.labels, result.slopes):
                text = "  ".join(f"{k}={v:.3f}" for k, v in per_norm.items())
                print(f"{label}: {text}")
        else:
            result = plot_slices(args.vtk, args.axis, args.coords,
                                 out_dir=args.out, stem=args.stem,
                                 fmt=args.format, cmap=args.cmap,
                                 style_seed=args.seed)
        for f in result.files:
            print(f)
        return 0
    except (ReaderError, DomainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
