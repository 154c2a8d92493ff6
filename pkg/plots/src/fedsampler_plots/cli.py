"""Command line: fedsampler-plot --out fig.png [--log] [--window N] label=csv[:column] ..."""

from __future__ import annotations

import argparse
import sys

from fedsampler_plots.plotting import (
    DEFAULT_COLUMN,
    DEFAULT_WINDOW,
    SchemaError,
    SeriesSpec,
    plot_compare,
)


def parse_series(arg: str) -> SeriesSpec:
    """Parse 'label=path' or 'label=path:column'."""
    if "=" not in arg:
        raise ValueError(f"expected label=csv[:column], got {arg!r}")
    label, rest = arg.split("=", 1)
    if ":" in rest:
        path, column = rest.rsplit(":", 1)
    else:
        path, column = rest, DEFAULT_COLUMN
    if not label or not path:
        raise ValueError(f"expected label=csv[:column], got {arg!r}")
    return SeriesSpec(label=label, path=path, column=column)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsampler-plot",
        description="Render comparison figures from fedsampler metrics CSVs")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--log", action="store_true",
                        help="plot log10 of the values")
    parser.add_argument("--window", type=int, default=DEFAULT_WINDOW,
                        help=f"moving-average window (default {DEFAULT_WINDOW}; 1 = raw)")
    parser.add_argument("series", nargs="+", metavar="label=csv[:column]")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        series = [parse_series(s) for s in args.series]
        out = plot_compare(series, args.out, log_scale=args.log, window=args.window)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
