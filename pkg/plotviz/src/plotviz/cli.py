"""Command-line entry point: render convergence plots from summary CSVs."""

from __future__ import annotations

import argparse

from .plotting import plot_convergence_panels


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render convergence figures from summary CSVs",
    )
    parser.add_argument("--summary", required=True,
                        help="summary CSV path, or several separated by commas")
    parser.add_argument("--out", required=True,
                        help="output image path (writes both .png and .svg)")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    paths = [p for p in args.summary.split(",") if p]
    png, svg = plot_convergence_panels(paths, args.out, title=args.title)
    print(f"wrote {png} and {svg}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
