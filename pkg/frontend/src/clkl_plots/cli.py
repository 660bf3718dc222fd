"""CLI: clkl-plot --fig <id> --csv <paths> --out <file> [--paper-overlay]."""

import argparse
import sys

from clkl_plots.figures import FIGURE_IDS, FigureSpec, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clkl-plot", description="Render benchmark figures from harness CSVs"
    )
    parser.add_argument("--fig", required=True, choices=FIGURE_IDS, help="figure id")
    parser.add_argument(
        "--csv", required=True,
        help="input CSV path(s); comma-separated when a figure combines sweeps",
    )
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument(
        "--paper-overlay", action="store_true",
        help="overlay published full-array reference values (labelled as published)",
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        figure_id=args.fig,
        csv_paths=tuple(p.strip() for p in args.csv.split(",") if p.strip()),
        out_path=args.out,
        paper_overlay=args.paper_overlay,
    )
    render(spec)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
