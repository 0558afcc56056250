"""oscillab-plot <figure-kind> <inputs...> -o <file>"""
from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .io import InputError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="oscillab-plot")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("inputs", nargs="+", help="ledger.csv / run.json paths")
    parser.add_argument("-o", "--output", required=True)
    parser.add_argument("--logx", action="store_true",
                        help="logarithmic time axis (energy/loss figures)")
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(args.kind, tuple(args.inputs), args.output,
                          logx=args.logx))
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
