"""Command line wrapper: curve-plots INPUT.csv OUTPUT.png [flags]."""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curve-plots",
        description="Render an error-vs-purchases chart from an aggregate CSV",
    )
    parser.add_argument("input", help="aggregate CSV (policy,spend,mean_error,stderr,mean_loss)")
    parser.add_argument("output", help="output image path (.png)")
    parser.add_argument("--title", default="")
    parser.add_argument("--y-min", type=float, default=None)
    parser.add_argument("--y-max", type=float, default=None)
    parser.add_argument("--no-bands", action="store_true",
                        help="hide the standard-error ribbons")
    parser.add_argument("--order", default=None,
                        help="comma-separated policy display order")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    y_range = None
    if (args.y_min is None) != (args.y_max is None):
        print("error: --y-min and --y-max must be given together", file=sys.stderr)
        return 1
    if args.y_min is not None:
        y_range = (args.y_min, args.y_max)
    spec = PlotSpec(
        input_csv=args.input,
        output_path=args.output,
        title=args.title,
        y_range=y_range,
        show_bands=not args.no_bands,
        policy_order=tuple(args.order.split(",")) if args.order else None,
    )
    try:
        out = render(spec)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
