"""Render publication figures from training-pipeline output files."""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .metrics import SchemaError
from .panels import render_heatmaps, render_learning_curves, render_scale_panels
from .style import apply_style, load_style


def _grid_pairs_from_dir(directory: str) -> list[tuple[str, str]]:
    pairs = []
    for csv_path in sorted(glob.glob(os.path.join(directory, "heatmap_*.csv"))):
        sidecar = csv_path[:-4] + ".json"
        if os.path.exists(sidecar):
            pairs.append((csv_path, sidecar))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hazardfigs",
        description="Figures for federated deterioration-model runs (reads CSV/JSON outputs).",
    )
    parser.add_argument("--style", help="style JSON overriding the built-in style")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output image path")
        p.add_argument("--format", choices=("svg", "png"), default="svg")
        p.add_argument("--dpi", type=int, default=150)

    p = sub.add_parser("scale", help="multi-run four-panel comparison")
    p.add_argument("--metrics", nargs="+", required=True, help="metrics CSV per run")
    p.add_argument("--summaries", nargs="+", required=True, help="summary JSON per run")
    common(p)

    p = sub.add_parser("curves", help="single-run learning curves")
    p.add_argument("--metrics", required=True)
    p.add_argument("--truth", help="coefficient JSON for dashed target lines")
    common(p)

    p = sub.add_parser("heatmaps", help="3x3 transition-probability sheet")
    p.add_argument("--grid-dir", required=True, help="directory of heatmap_*.csv/.json pairs")
    common(p)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    style = load_style(args.style)
    apply_style(style)
    try:
        if args.command == "scale":
            if len(args.metrics) != len(args.summaries):
                print("error: --metrics and --summaries must pair up", file=sys.stderr)
                return 2
            render_scale_panels(list(zip(args.metrics, args.summaries)), args.out,
                                args.format, args.dpi, style)
        elif args.command == "curves":
            render_learning_curves(args.metrics, args.truth, args.out,
                                   args.format, args.dpi, style)
        else:
            pairs = _grid_pairs_from_dir(args.grid_dir)
            render_heatmaps(pairs, args.out, args.format, args.dpi, style)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
