"""Command line: plotkit <cost|curves|compare|fields> --in FILES --out DIR."""

from __future__ import annotations

import argparse
import sys

from .plots import PlotSpec, render
from .readers import FormatError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    parser.add_argument("which", choices=("cost", "curves", "compare", "fields"))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="trace CSV, curve or VTK files")
    parser.add_argument("--out", dest="out_dir", required=True, help="output directory")
    parser.add_argument("--rescale", action="store_true",
                        help="min-max normalize each cost series to [0, 1]")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(args.which, args.inputs, args.out_dir, rescale=args.rescale)
        written = render(spec)
    except (FormatError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
