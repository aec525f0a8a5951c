"""`mmcplot <kind> <csv> -o <img>` entry point."""

from __future__ import annotations

import argparse
import sys

from .plots import PLOT_KINDS, PlotSpec, render
from .schema import SchemaError, load_manifest


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="mmcplot",
        description="Render workbench CSV output as figures")
    ap.add_argument("kind", choices=PLOT_KINDS)
    ap.add_argument("csv", help="time-series or sweep CSV")
    ap.add_argument("-o", "--out", required=True, help="output image path")
    ap.add_argument("--arm", choices=("u", "l"), default="u",
                    help="arm for estimates_overlay (default: upper)")
    ap.add_argument("--xlabel", default=None)
    ap.add_argument("--ylabel", default=None)
    ap.add_argument("--title", default=None)
    args = ap.parse_args(argv)
    manifest = load_manifest(args.csv)
    annotation = None
    if manifest:
        annotation = f"seed {manifest.get('seed')} · dcmmc {manifest.get('version')}"
    try:
        out = render(PlotSpec(csv_path=args.csv, kind=args.kind,
                              out_path=args.out, arm=args.arm,
                              xlabel=args.xlabel, ylabel=args.ylabel,
                              title=args.title, annotation=annotation))
    except SchemaError as exc:
        print(f"mmcplot: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
