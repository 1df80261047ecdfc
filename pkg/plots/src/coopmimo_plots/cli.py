"""Command line for figure rendering: coopmimo-plots render ..."""

from __future__ import annotations

import argparse
import sys

from .render import KIND_TO_EXPERIMENT, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopmimo-plots",
                                     description="render experiment CSVs as figures")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure from CSV input")
    r.add_argument("--kind", required=True, choices=sorted(KIND_TO_EXPERIMENT),
                   help="figure kind")
    r.add_argument("--in", dest="inputs", required=True, nargs="+",
                   help="input CSV file(s)")
    r.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(FigureSpec(input_csvs=tuple(args.inputs),
                                figure_kind=args.kind, output_path=args.out))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
