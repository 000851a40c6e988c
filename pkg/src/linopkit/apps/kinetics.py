"""Batched chemistry toy problem: independent stiff 3-species cells.

Every grid cell carries concentrations u = (A, B, C) coupled by the
reversible chain A <-> B <-> C with its own random rate constants.  One
backward Euler step per cell solves (I - dt K_cell) u_new = u_old; every
cell shares the 7-entry sparsity pattern of K, which is exactly the shape
the batched solver wants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..batched import BatchCsr, BatchDense, BatchSolveReport, batch_solve
from ..container import MatrixData
from ..executor import executor_from_name
from ..solver import Iteration, ResidualNorm

#: (row, col) pattern of the rate matrix, in converted (row-major) order.
STENCIL = ((0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2))


def cell_matrix_values(rates: np.ndarray, dt: float) -> np.ndarray:
    """Per-cell values of I - dt K, one row per cell, STENCIL order.

    ``rates`` has one row (k1, k2, k3, k4) per cell: forward/backward for
    A<->B, then forward/backward for B<->C.  Columns of K sum to zero, so
    I - dt K is nonsingular for any dt > 0.
    """
    k1, k2, k3, k4 = rates.T
    return np.column_stack(
        [
            1.0 + dt * k1,
            -dt * k2,
            -dt * k1,
            1.0 + dt * (k2 + k3),
            -dt * k4,
            -dt * k3,
            1.0 + dt * k4,
        ]
    )


@dataclass
class KineticsReport:
    num_cells: int
    dt: float
    solutions: np.ndarray  # (num_cells, 3) concentrations after the step
    solve: BatchSolveReport


def run_kinetics_step(num_cells: int, dt: float = 0.002, backend: str = "reference",
                      worker_count: int | None = None, seed: int = 1234,
                      max_iters: int = 50, reduction_factor: float = 1e-12) -> KineticsReport:
    """One batched backward Euler step for ``num_cells`` independent cells."""
    exec_ = executor_from_name(backend, worker_count)
    rng = np.random.default_rng(seed)
    rates = rng.uniform(1.0, 1000.0, size=(num_cells, 4))

    template = MatrixData((3, 3), [(r, c, 1.0) for r, c in STENCIL])
    a = BatchCsr.from_template(exec_, num_cells, template, cell_matrix_values(rates, dt))

    u_old = np.zeros((num_cells, 3, 1))
    u_old[:, 0, 0] = 1.0  # everything starts as species A
    b = BatchDense.from_values(exec_, u_old)
    x = BatchDense.from_values(exec_, u_old)  # previous state as initial guess

    report = batch_solve(
        "bicgstab",
        a,
        b,
        x,
        criteria=(Iteration(max_iters), ResidualNorm(reduction_factor)),
    )
    return KineticsReport(
        num_cells=num_cells,
        dt=dt,
        solutions=x.values[:, :, 0].copy(),
        solve=report,
    )
