"""Command line: ssd-plot <run_dir> --kind snapshots --times t1,t2,..."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, PlotJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssd-plot", description="Render figures from an ssd-sim run directory."
    )
    parser.add_argument("run_dir", type=Path, help="run directory with the CSV outputs")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument(
        "--times", default="", help="comma-separated snapshot times (kind=snapshots)"
    )
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--format", default="png", choices=("png", "pdf", "svg"))
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    times = [float(tok) for tok in args.times.split(",") if tok]
    job = PlotJob(
        run_dir=args.run_dir, kind=args.kind, times=times,
        out_dir=args.out, fmt=args.format, dpi=args.dpi,
    )
    for path in render(job):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
