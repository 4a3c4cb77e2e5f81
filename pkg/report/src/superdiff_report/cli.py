"""Batch figure rendering: `report render --kind lil --in DIR --out DIR`."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, MissingInput, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="report")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("render", help="render figures from an artifact dir")
    sp.add_argument("--kind", required=True, choices=KINDS)
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", dest="out_dir", required=True)
    sp.add_argument("--dpi", type=int, default=120)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        paths = render(FigureSpec(kind=args.kind, in_dir=args.in_dir,
                                  out_dir=args.out_dir, dpi=args.dpi))
    except (SchemaMismatch, MissingInput) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
