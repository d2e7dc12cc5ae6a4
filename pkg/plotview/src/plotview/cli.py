"""Command line: plotview <csv> --out <png> [--ylabel <str>] [--title <str>]."""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotview", description=__doc__)
    parser.add_argument("csv", help="experiment result CSV")
    parser.add_argument("--out", required=True, help="output image path (PNG)")
    parser.add_argument("--ylabel", default="$\\ell_2$ error", help="y-axis label")
    parser.add_argument("--title", default="", help="figure title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        input_csv=args.csv,
        output_path=args.out,
        title=args.title,
        y_label=args.ylabel,
    )
    try:
        curves = render(spec)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({len(curves)} curves)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
