"""Command line entry point: figures <kind> --in <csv...> --out <img>.

Exit codes: 0 success, 1 usage error, 2 missing/malformed CSV data.
"""

import argparse
import sys
from typing import Optional, Sequence

from . import __version__
from .csvio import SchemaError
from .plots import KINDS, ConvergenceResult, FigureSpec, GrowthResult, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="render report figures from dgflow CSV files")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("kind", choices=KINDS,
                        help="which figure to draw")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (.svg preferred, .png works)")
    parser.add_argument("--title", default=None)
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad argv; fold that into the usage-error code
        return 0 if err.code == 0 else 1

    spec = FigureSpec(inputs=args.inputs, kind=args.kind, out=args.out,
                      title=args.title, xlabel=args.xlabel,
                      ylabel=args.ylabel)
    try:
        result = render(spec)
    except SchemaError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2

    if isinstance(result, ConvergenceResult):
        for (prob, p), slope in sorted(result.slopes.items()):
            print(f"  {prob} p={p}: fitted slope {slope:.3f}")
    elif isinstance(result, GrowthResult):
        print(f"  {result.n_samples} samples, reference factor "
              f"{result.reference_factor:.4g}")
    else:
        print(f"  grid {result.shape[1]}x{result.shape[0]}"
              + (f", overlay t = {result.overlay}" if result.overlay else ""))
    print(f"wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
