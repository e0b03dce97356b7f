"""Command-line front end: ``plot <kind> --in a.csv [--in2 b.csv] --out fig.svg``.

Exit codes: 0 success, 2 usage/argument error, 3 missing column, 5 I/O
failure, 1 anything else figure-related.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, Io, MissingColumn, PlotsError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render figures from manifold-ctrl CSV time series.",
    )
    parser.add_argument("kind", choices=list(FIGURE_KINDS))
    parser.add_argument("--in", dest="csv", required=True,
                        help="input CSV time series")
    parser.add_argument("--in2", dest="csv2",
                        help="second CSV for comparison overlays")
    parser.add_argument("--out", required=True, help="output image (.svg or .png)")
    parser.add_argument("--format", dest="fmt", choices=["svg", "png"],
                        help="override the format implied by --out")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, csv=Path(args.csv), out=Path(args.out),
                      csv2=Path(args.csv2) if args.csv2 else None, fmt=args.fmt)
    try:
        out = render(spec)
    except MissingColumn as exc:
        print(f"plot: error[missing-column]: {exc}", file=sys.stderr)
        return 3
    except Io as exc:
        print(f"plot: error[io]: {exc}", file=sys.stderr)
        return 5
    except PlotsError as exc:
        print(f"plot: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
