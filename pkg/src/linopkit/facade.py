"""Application-side solver boundary.

The application owns its vectors and matrices and talks to a solver through
the small interfaces here: :class:`AppVector`, :class:`AppMatrix`,
:class:`AbstractSolver` and the five-field :class:`SolverOptions`.  Nothing
in those interfaces names a backend type, so swapping the linear algebra
library underneath means swapping the one implementation class.

The implementation converts the application matrix exactly once (an explicit,
counted copy) when the solver is built.  Vectors are never copied: each solve
wraps the application's buffers in views, a read-only one over b and a
mutable one over x, so the solution lands directly in application storage.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .container import Dim, MatrixData, array_view
from .errors import ConfigurationError, InvalidArgumentError
from .executor import Executor, executor_from_name
from .linop import Csr, Dense
from .solver import (
    DEFAULT_RESTART,
    Iteration,
    ResidualNorm,
    SolveReport,
    SolverFactory,
)

VALID_ALGORITHMS = ("cg", "bicgstab", "gmres", "lu")
VALID_PRECONDITIONERS = ("none", "jacobi")

_HOST = executor_from_name("reference")


class AppVector:
    """A vector as an application would own it: one flat float64 buffer.

    Rows may be padded (``stride >= num_cols``); element (i, j) lives at flat
    offset ``i * stride + j``.  The arithmetic helpers exist so application
    code in the demos never has to import backend types.
    """

    def __init__(self, num_rows, num_cols=1, stride=None, data=None):
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self.stride = self.num_cols if stride is None else int(stride)
        if self.num_rows < 0 or self.num_cols < 1 or self.stride < self.num_cols:
            raise InvalidArgumentError(
                f"bad vector geometry: rows={num_rows} cols={num_cols} stride={stride}"
            )
        total = self.num_rows * self.stride
        if data is None:
            self._data = np.zeros(total)
        else:
            if (
                not isinstance(data, np.ndarray)
                or data.ndim != 1
                or data.shape[0] != total
                or data.dtype != np.float64
            ):
                raise InvalidArgumentError(f"data must be a flat float64 array of {total} elements")
            self._data = data

    @classmethod
    def from_values(cls, values, stride=None) -> "AppVector":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        rows, cols = arr.shape
        out = cls(rows, cols, stride)
        out._view2d()[...] = arr
        return out

    def total_size(self) -> int:
        return self.num_rows * self.stride

    def data(self) -> np.ndarray:
        """The raw flat buffer; what gets handed to views."""
        return self._data

    def _view2d(self) -> np.ndarray:
        return self._data.reshape(self.num_rows, self.stride)[:, : self.num_cols]

    def get(self, i, j=0) -> float:
        return float(self._data[i * self.stride + j])

    def set(self, i, value, j=0) -> None:
        self._data[i * self.stride + j] = float(value)

    def to_array(self) -> np.ndarray:
        """Copy of the logical (rows, cols) block, squeezed for single columns."""
        block = np.array(self._view2d())
        return block[:, 0] if self.num_cols == 1 else block

    # arithmetic, delegated through zero-copy views so the results are the
    # library's, not a reimplementation
    def scale(self, alpha) -> None:
        _dense_view(_HOST, self).scale(alpha)

    def add_scaled(self, alpha, other: "AppVector") -> None:
        _dense_view(_HOST, self).add_scaled(alpha, _dense_view(_HOST, other))

    def dot(self, other: "AppVector"):
        out = _dense_view(_HOST, self).dot(_dense_view(_HOST, other))
        return float(out[0]) if self.num_cols == 1 else out

    def norm2(self):
        out = _dense_view(_HOST, self).norm2()
        return float(out[0]) if self.num_cols == 1 else out


class AppMatrix:
    """A sparse matrix as an application would assemble it: a triplet bag."""

    def __init__(self, num_rows, num_cols):
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self._triplets: list[tuple[int, int, float]] = []

    def add_entry(self, row, col, value) -> None:
        if not (0 <= row < self.num_rows and 0 <= col < self.num_cols):
            raise InvalidArgumentError(
                f"entry ({row}, {col}) outside {self.num_rows}x{self.num_cols} matrix"
            )
        self._triplets.append((int(row), int(col), float(value)))

    def __iter__(self):
        """Yields every stored (row, col, value) exactly once."""
        return iter(self._triplets)

    def __len__(self) -> int:
        return len(self._triplets)


def _dense_view(exec_: Executor, vec: AppVector, const: bool = False) -> Dense:
    arr = array_view(exec_, vec.total_size(), vec.data(), const=const)
    size = Dim(vec.num_rows, vec.num_cols)
    if const:
        return Dense.create_const(exec_, size, arr, stride=vec.stride)
    return Dense.from_array(exec_, size, arr, stride=vec.stride)


@dataclass(frozen=True)
class SolverOptions:
    """The complete, fixed option set an application configures a solver with.

    ``wrap_in_gmres`` only matters for ``algorithm="lu"``: it selects GMRES
    right-preconditioned by the LU factorization instead of a plain direct
    solve, which turns an outdated factorization into a preconditioner rather
    than a wrong answer.
    """

    algorithm: str
    max_iters: int = 1000
    reduction_factor: float = 1e-10
    wrap_in_gmres: bool = False
    preconditioner: str = "none"


class AbstractSolver(ABC):
    """What the application sees: solve and update, nothing backend-shaped."""

    @abstractmethod
    def solve(self, b: AppVector, x: AppVector) -> SolveReport:
        """Solve into x (initial guess in, solution out)."""

    @abstractmethod
    def update_matrix_values(self, values) -> None:
        """Replace the system matrix values; the sparsity pattern stays."""


class BackendSolver(AbstractSolver):
    """AbstractSolver implementation backed by this library.

    Set ``iteration_callback`` to a callable taking (iteration,
    residual_norm) to observe the residual history of subsequent solves.
    """

    def __init__(self, executor: Executor, matrix: AppMatrix, options: SolverOptions,
                 restart: int | None = None):
        _validate_options(options)
        self._executor = executor
        data = MatrixData(Dim(matrix.num_rows, matrix.num_cols))
        for row, col, value in matrix:
            data.add(row, col, value)
        self._matrix = Csr.from_data(executor, data)  # the one conversion copy
        algorithm = options.algorithm
        if algorithm == "lu" and options.wrap_in_gmres:
            algorithm = "gmres_lu"
        factory = SolverFactory(
            algorithm=algorithm,
            criteria=(Iteration(options.max_iters), ResidualNorm(options.reduction_factor)),
            preconditioner=None if options.preconditioner == "none" else options.preconditioner,
            restart=DEFAULT_RESTART if restart is None else restart,
        )
        self._solver = factory.generate(self._matrix)
        self.iteration_callback = None

    def solve(self, b: AppVector, x: AppVector) -> SolveReport:
        gb = _dense_view(self._executor, b, const=True)
        gx = _dense_view(self._executor, x)
        return self._solver.solve(gb, gx, callback=self.iteration_callback)

    def update_matrix_values(self, values) -> None:
        """values follow the converted pattern: row-major, columns sorted."""
        self._matrix.update_values(values)
        self._solver.refresh()


def _validate_options(options: SolverOptions) -> None:
    if options.algorithm not in VALID_ALGORITHMS:
        raise ConfigurationError(
            f"unknown algorithm '{options.algorithm}'; valid: {', '.join(VALID_ALGORITHMS)}"
        )
    if options.preconditioner not in VALID_PRECONDITIONERS:
        raise ConfigurationError(
            f"unknown preconditioner '{options.preconditioner}'; "
            f"valid: {', '.join(VALID_PRECONDITIONERS)}"
        )
    if options.max_iters < 0:
        raise ConfigurationError(f"max_iters must be >= 0, got {options.max_iters}")
    if not options.reduction_factor > 0:
        raise ConfigurationError(
            f"reduction_factor must be > 0, got {options.reduction_factor}"
        )


def create_solver(executor: Executor, matrix: AppMatrix, options: SolverOptions,
                  restart: int | None = None) -> AbstractSolver:
    """Build the library-backed solver for an application matrix.

    ``restart`` (GMRES only) rides outside SolverOptions on purpose: the
    option set is part of the application-facing interface and stays fixed.
    """
    return BackendSolver(executor, matrix, options, restart)


class SolverRegistry:
    """String-keyed store of live solvers, shared across call sites.

    ``get_or_create`` runs the builder under a lock so concurrent callers
    with the same key get the same object.  A builder that raises stores
    nothing; the next call retries.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()

    def get_or_create(self, key: str, builder):
        with self._lock:
            if key not in self._entries:
                self._entries[key] = builder()
            return self._entries[key]

    def discard(self, key: str) -> None:
        with self._lock:
            self._entries.pop(key, None)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
