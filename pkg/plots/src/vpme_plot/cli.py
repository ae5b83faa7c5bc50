"""The ``vpme-plot`` command.

One figure per invocation: pick a kind, point at the producing files,
name the PNG. Exit code 0 on success (including an empty input, which
yields a "no data" figure), 2 when an input is missing or does not
match the documented schema; schema failures name the offending
column on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .figures import KINDS, FigureError, FigureSpec, Style, render
from .schema import SchemaMismatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpme-plot",
        description="Render a diagnostic figure from vpme output files.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind")
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        metavar="PATH",
                        help="input files (NDJSON/CSV records; a binary "
                             "snapshot for phase_space_scatter)")
    parser.add_argument("--out", required=True, metavar="FILE.png",
                        help="output image path")
    parser.add_argument("--dpi", type=int, default=120,
                        help="output resolution (default 120)")
    parser.add_argument("--cmap", default="viridis",
                        help="colormap for heatmaps and 2d scatters")
    parser.add_argument("--point-size", type=float, default=2.0,
                        help="marker area for scatter plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec_style = Style(dpi=args.dpi, cmap=args.cmap,
                       point_size=args.point_size)
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          out=args.out, style=spec_style)
        out = render(spec)
    except SchemaMismatch as exc:
        column = f" (column: {exc.field})" if exc.field else ""
        print(f"error: {exc}{column}", file=sys.stderr)
        return 2
    except (FigureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"kind": args.kind, "out": out,
                      "inputs": len(spec.inputs)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
