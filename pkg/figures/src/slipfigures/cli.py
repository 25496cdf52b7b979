"""Command-line entry point: render one figure from exported artifacts."""

import argparse
import sys

from .render import KINDS, FigureError, FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slipgait-figures",
        description="Render figures from slipgait CSV/JSON exports "
                    "(no simulation is performed).")
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--input", required=True, action="append",
                    help="input CSV; repeat for kinds that take several "
                         "(transition-overlay: window CSV then angle CSV)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--title", default=None)
    ap.add_argument("--cap", type=float, default=None,
                    help="color-scale cap (defaults: 25 steps / 10 deg)")
    ap.add_argument("--plan", default=None,
                    help="plan JSON for transition markers (trajectory kind)")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    extra = {}
    if args.plan:
        extra["plan"] = args.plan
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.input, out=args.out,
                          title=args.title, cap=args.cap, extra=extra)
        out = render(spec)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
