"""CLI: plots --in <dir> --fig {4|5|6|7} --out <path>."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_PRESETS, MissingColumn, SchemaMismatch, preset_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="render figures from harness CSVs")
    parser.add_argument("--in", dest="input_dir", required=True,
                        help="directory holding summary.csv")
    parser.add_argument("--fig", required=True, choices=sorted(FIGURE_PRESETS),
                        help="which figure to render")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        out = render(preset_spec(args.fig, args.input_dir, args.out))
    except (SchemaMismatch, MissingColumn) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
