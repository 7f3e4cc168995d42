"""cfrender: paper-style panels from cfgreen CSV files.

Exit codes: 0 success, 2 schema/selection/config error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .panels import PanelSpec, render_panels
from .reader import SchemaError, SelectionError


def _parse_pairs(values) -> list[tuple[int, int]] | None:
    if not values:
        return None
    pairs = []
    for item in values:
        bits = item.split(",")
        if len(bits) != 2:
            raise SchemaError(f"bad pair {item!r}; expected like 0,1")
        pairs.append((int(bits[0]), int(bits[1])))
    return pairs


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfrender")
    subs = parser.add_subparsers(dest="command", required=True)
    render = subs.add_parser("render", help="render panels from CSV output")
    render.add_argument("--input", nargs="+", required=True,
                        help="one or more cfgreen CSV files")
    render.add_argument("--pairs", nargs="*", default=None,
                        help="(i,j) selections like 0,0 0,1; default all")
    render.add_argument("--levels", default=None,
                        help="comma-separated levels to overlay; default all")
    render.add_argument("--out", required=True, help="output directory")
    render.add_argument("--linear-error", action="store_true",
                        help="linear instead of log error axis")
    return parser


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    levels = None
    if args.levels is not None:
        levels = [int(x) for x in str(args.levels).split(",") if x != ""]
    spec = PanelSpec(inputs=args.input,
                     pairs=_parse_pairs(args.pairs),
                     levels=levels,
                     out_dir=args.out,
                     log_error=not args.linear_error)
    written = render_panels(spec)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> None:
    try:
        code = run(argv)
    except (SchemaError, SelectionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        sys.exit(4)
    sys.exit(code)


if __name__ == "__main__":
    main()
