"""Command-line front end.

Subcommands:
    run <batch> --out DIR [--jobs K] [--seed S]   execute a batch file
    plot-data <trace.csv> --kind KIND --out FILE  plot-ready series from a trace
    verify-table1 [--tolerance T]                 check the bundled Gaussian suite

Exit codes: 0 success, 1 run failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import BatchFormatError, GmrfGeodesicsError
from .integrator import load_trace
from .experiments import emit_plot_series, run_batch, verify_table1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmrf-geodesics",
        description="Geodesic curves in the Gaussian-Markov random field parameter manifold.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute every experiment in a batch file")
    p_run.add_argument("batch", help="batch .toml (or a summary.json from a previous run)")
    p_run.add_argument("--out", required=True, help="output directory for traces and summaries")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed of every experiment")

    p_plot = sub.add_parser("plot-data", help="emit a tidy CSV series from a trace file")
    p_plot.add_argument("trace", help="trace CSV written by a run")
    p_plot.add_argument("--kind", required=True, choices=("trajectory3d", "entropy", "curvature"))
    p_plot.add_argument("--out", required=True, help="output CSV path")

    p_verify = sub.add_parser("verify-table1", help="run the bundled Gaussian suite against its reference values")
    p_verify.add_argument("--tolerance", type=float, default=0.01, help="relative tolerance (default 0.01)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_batch(args.batch, args.out, jobs=args.jobs, seed=args.seed)
        if args.command == "plot-data":
            trace = load_trace(args.trace)
            emit_plot_series(trace, args.kind, args.out)
            return 0
        if args.command == "verify-table1":
            return 0 if verify_table1(tolerance=args.tolerance) else 1
    except BatchFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GmrfGeodesicsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
