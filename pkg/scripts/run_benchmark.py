#!/usr/bin/env python3
"""Thin wrapper around the benchmark CLI, for running from a checkout.

Same flags as the installed ``linopkit-bench`` entry point, for example:

    python scripts/run_benchmark.py --matrix data/spd_lattice.mtx \
        --backend parallel --solver cg --preconditioner jacobi
"""

import sys

from linopkit.apps.cli import main

if __name__ == "__main__":
    sys.exit(main())
