"""acplots: render a figure spec against a directory of experiment CSVs.

Usage: acplots SPEC.json [--data-dir DIR] [--out-dir DIR]
Exit codes: 0 rendered, 1 bad spec or unusable inputs.
"""

from __future__ import annotations

import argparse
import sys

from .render import render
from .spec import load_spec
from .tables import TableError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="acplots", description=__doc__)
    parser.add_argument("spec", help="path to a figure spec (JSON)")
    parser.add_argument("--data-dir", default="out", help="directory with the input CSVs")
    parser.add_argument("--out-dir", default="figs", help="directory for the rendered image")
    args = parser.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        out = render(spec, args.data_dir, args.out_dir)
    except (ValueError, FileNotFoundError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
