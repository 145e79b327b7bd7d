"""Command-line entry point: plots <kind> --in <paths> --out <image>."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="static figures from epdlab CSV/JSON artifacts",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="PATH", help="input CSV (and JSON) artifacts")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--xscale", choices=("linear", "log"), default=None)
    parser.add_argument("--yscale", choices=("linear", "log"), default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          output=args.out, xscale=args.xscale,
                          yscale=args.yscale)
        render(spec)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
