"""Steady-state heat conduction on the unit square, facade edition.

The Poisson problem -lap(u) = f with u = 0 on the boundary, discretized with
the 5-point stencil on an n x n interior grid.  The manufactured solution
u*(x, y) = sin(pi x) sin(pi y) gives f = 2 pi^2 u*, so the discretization
error is known to shrink like h^2.

Everything below talks to the solver exclusively through the application
facade: assembly into AppMatrix, vectors in AppVector, configuration through
SolverOptions.  No backend type appears, which is the point of the demo; the
backend is chosen by a single string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..executor import executor_from_name
from ..facade import AppMatrix, AppVector, SolverOptions, create_solver


@dataclass
class HeatReport:
    n: int
    backend: str
    iterations: int
    converged: bool
    initial_residual_norm: float
    final_residual_norm: float
    max_error: float
    solution: np.ndarray


def assemble_poisson(n: int) -> AppMatrix:
    """5-point stencil for the n x n interior grid, scaled by 1/h^2."""
    h = 1.0 / (n + 1)
    diag = 4.0 / (h * h)
    off = -1.0 / (h * h)
    matrix = AppMatrix(n * n, n * n)
    for i in range(n):
        for j in range(n):
            row = i * n + j
            matrix.add_entry(row, row, diag)
            if i > 0:
                matrix.add_entry(row, row - n, off)
            if i < n - 1:
                matrix.add_entry(row, row + n, off)
            if j > 0:
                matrix.add_entry(row, row - 1, off)
            if j < n - 1:
                matrix.add_entry(row, row + 1, off)
    return matrix


def manufactured_solution(n: int) -> np.ndarray:
    h = 1.0 / (n + 1)
    x = (np.arange(n) + 1) * h
    return np.outer(np.sin(math.pi * x), np.sin(math.pi * x)).ravel()


def run_heat_demo(n: int, backend: str = "reference", worker_count: int | None = None,
                  reduction_factor: float = 1e-10, max_iters: int | None = None,
                  preconditioner: str = "jacobi") -> HeatReport:
    """Assemble, solve with CG, and compare against the manufactured solution."""
    exec_ = executor_from_name(backend, worker_count)
    matrix = assemble_poisson(n)
    exact = manufactured_solution(n)
    f = 2.0 * math.pi**2 * exact

    b = AppVector.from_values(f)
    x = AppVector(n * n)
    options = SolverOptions(
        algorithm="cg",
        max_iters=max_iters if max_iters is not None else 10 * n * n,
        reduction_factor=reduction_factor,
        wrap_in_gmres=False,
        preconditioner=preconditioner,
    )
    solver = create_solver(exec_, matrix, options)
    report = solver.solve(b, x)

    solution = x.to_array()
    return HeatReport(
        n=n,
        backend=backend,
        iterations=report.iterations,
        converged=report.converged,
        initial_residual_norm=report.initial_residual_norm,
        final_residual_norm=report.final_residual_norm,
        max_error=float(np.max(np.abs(solution - exact))),
        solution=solution,
    )
