"""CLI: plots <kind> --in <dir> --out <file.png>."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from tvspline experiment artifacts"
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="input_dir", required=True,
                        help="directory holding profile.csv / convergence.csv / summary.json")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="output PNG path")
    args = parser.parse_args(argv)
    try:
        meta = render(FigureJob(args.kind, args.input_dir, args.output_path))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {args.output_path} ({meta['width_px']}x{meta['height_px']} px)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
