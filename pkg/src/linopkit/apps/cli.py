"""Command line entry point for the benchmark driver.

Exit status: 0 when the solve converged, 1 when it ran but did not converge,
2 on any error (bad flags, unreadable files, solver setup failures).  Errors
print a diagnostic to stderr and produce no JSON.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import LibraryError
from .bench import run_benchmark
from .config import build_run_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linopkit-bench",
        description="Run one sparse solve and print a flat JSON report.",
    )
    parser.add_argument("--backend", help="execution backend: reference | parallel")
    parser.add_argument("--matrix", help="Matrix Market file (coordinate real)")
    parser.add_argument("--solver", help="algorithm: cg | bicgstab | gmres | lu")
    parser.add_argument("--preconditioner", help="none | jacobi")
    parser.add_argument("--max-iters", type=int, dest="max_iters")
    parser.add_argument("--reduction-factor", type=float, dest="reduction_factor")
    parser.add_argument("--restart", type=int, help="GMRES restart length")
    parser.add_argument("--rhs", help="ones | random(<seed>) | path to a value file")
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--output", help="write the JSON report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    flags = {
        "backend": args.backend,
        "matrix": args.matrix,
        "solver": args.solver,
        "preconditioner": args.preconditioner,
        "max_iters": args.max_iters,
        "reduction_factor": args.reduction_factor,
        "restart": args.restart,
        "rhs": args.rhs,
        "output": args.output,
    }
    try:
        cfg = build_run_config(flags, config_path=args.config)
        report = run_benchmark(cfg)
    except (LibraryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.to_json()
    if cfg.output:
        try:
            with open(cfg.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    else:
        print(text)
    return 0 if report.converged else 1


if __name__ == "__main__":
    sys.exit(main())
