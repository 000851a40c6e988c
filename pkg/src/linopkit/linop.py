"""Linear operators: the abstract contract plus dense and CSR matrices.

Everything that maps vectors to vectors (matrices, preconditioners, solvers)
implements :class:`LinOp`, so algorithms written against ``apply`` compose
freely: a solver can precondition with another solver, a time stepper can
treat a solver as the inverse of its system matrix, and so on.

Vectors are column blocks stored as :class:`Dense` with ``cols`` right-hand
sides side by side.
"""

from __future__ import annotations

import abc

import numpy as np

from .container import (
    Array,
    Dim,
    MatrixData,
    Ownership,
    _count_conversion,
    _count_elements,
    array_create,
    array_view,
)
from .errors import DimensionError, InvalidArgumentError
from .executor import Executor, dispatch


class LinOp(abc.ABC):
    """A linear map of a fixed size bound to an executor."""

    def __init__(self, executor: Executor, size):
        size = Dim(int(size[0]), int(size[1]))
        if size.rows < 0 or size.cols < 0:
            raise InvalidArgumentError(f"operator dimensions must be >= 0, got {size}")
        self._executor = executor
        self._size = size

    @property
    def executor(self) -> Executor:
        return self._executor

    @property
    def size(self) -> Dim:
        return self._size

    def apply(self, b: "Dense", x: "Dense") -> None:
        """x := op(b).

        For matrices op(b) is the matrix-vector product; for solvers it is an
        approximate inverse application that uses the incoming ``x`` as the
        initial guess.  ``b`` and ``x`` must not alias.
        """
        self._check_vectors(b, x)
        self._apply(b, x)

    def advanced_apply(self, alpha: float, b: "Dense", beta: float, x: "Dense") -> None:
        """x := alpha * op(b) + beta * x."""
        self._check_vectors(b, x)
        self._advanced_apply(float(alpha), b, float(beta), x)

    def _check_vectors(self, b: "Dense", x: "Dense") -> None:
        if not isinstance(b, Dense) or not isinstance(x, Dense):
            raise InvalidArgumentError("apply expects Dense vectors")
        if b.size.rows != self._size.cols:
            raise DimensionError(
                f"operator is {self._size.rows}x{self._size.cols}: "
                f"expected b with {self._size.cols} rows, got {b.size.rows}"
            )
        if x.size.rows != self._size.rows:
            raise DimensionError(
                f"operator is {self._size.rows}x{self._size.cols}: "
                f"expected x with {self._size.rows} rows, got {x.size.rows}"
            )
        if b.size.cols != x.size.cols:
            raise DimensionError(
                f"b has {b.size.cols} columns but x has {x.size.cols}"
            )
        if np.shares_memory(b.values.numpy(), x.values.numpy()):
            raise InvalidArgumentError("b and x must not alias the same storage")

    @abc.abstractmethod
    def _apply(self, b: "Dense", x: "Dense") -> None: ...

    @abc.abstractmethod
    def _advanced_apply(self, alpha: float, b: "Dense", beta: float, x: "Dense") -> None: ...


class Dense(LinOp):
    """Row-major dense matrix (or multi-vector) with an explicit row stride.

    Element (i, j) lives at flat offset ``i * stride + j`` of the backing
    array, so a Dense can wrap application storage with padding between rows
    without copying it.
    """

    def __init__(self, executor: Executor, size, values: Array, stride: int | None = None):
        super().__init__(executor, size)
        rows, cols = self._size
        stride = cols if stride is None else int(stride)
        if stride < cols:
            raise InvalidArgumentError(f"stride {stride} is smaller than column count {cols}")
        needed = (rows - 1) * stride + cols if rows > 0 else 0
        if values.size < needed:
            raise InvalidArgumentError(
                f"storage of {values.size} elements cannot hold "
                f"{rows}x{cols} with stride {stride} (needs {needed})"
            )
        self._values = values
        self._stride = stride
        self._block = None

    @classmethod
    def create(cls, executor: Executor, size, stride: int | None = None) -> "Dense":
        """Owning, zero-initialized."""
        rows, cols = int(size[0]), int(size[1])
        stride = cols if stride is None else int(stride)
        return cls(executor, size, array_create(executor, rows * stride), stride)

    @classmethod
    def from_array(cls, executor: Executor, size, values: Array, stride: int | None = None) -> "Dense":
        """Wrap existing storage (no copy)."""
        return cls(executor, size, values, stride)

    @classmethod
    def create_const(cls, executor: Executor, size, values: Array, stride: int | None = None) -> "Dense":
        """Wrap existing storage read-only (no copy); writes raise."""
        data = values.numpy().view()
        data.flags.writeable = False
        return cls(executor, size, Array(executor, data, Ownership.BORROWED_CONST), stride)

    @property
    def values(self) -> Array:
        return self._values

    @property
    def stride(self) -> int:
        return self._stride

    def view2d(self) -> np.ndarray:
        """The logical (rows, cols) block as a strided numpy view.

        Geometry is fixed at construction, so the view is built once and
        reused; it shares storage, it is not a snapshot.
        """
        if self._block is None:
            rows, cols = self._size
            flat = self._values.numpy()
            item = flat.strides[0]
            self._block = np.lib.stride_tricks.as_strided(
                flat, shape=(rows, cols), strides=(item * self._stride, item)
            )
        return self._block

    def at(self, i: int, j: int = 0) -> float:
        return float(self.view2d()[i, j])

    def set_at(self, i: int, j: int, value: float) -> None:
        self.view2d()[i, j] = value

    def column(self, j: int) -> "Dense":
        """Column ``j`` as a (rows, 1) view sharing this storage."""
        rows, cols = self._size
        if not 0 <= j < cols:
            raise InvalidArgumentError(f"column {j} out of range for {cols} columns")
        flat = self._values.numpy()[j:]
        owner = (
            Ownership.BORROWED_CONST
            if self._values.ownership is Ownership.BORROWED_CONST
            else Ownership.BORROWED
        )
        return Dense(self._executor, Dim(rows, 1), Array(self._executor, flat, owner), stride=self._stride)

    def fill(self, value: float) -> None:
        dispatch(self._executor, "fill")(self.view2d(), value)

    def scale(self, alpha) -> None:
        """self *= alpha (alpha scalar, or one factor per column)."""
        dispatch(self._executor, "scale")(self.view2d(), alpha)

    def add_scaled(self, alpha, other: "Dense") -> None:
        """self += alpha * other."""
        self._check_same_shape(other)
        dispatch(self._executor, "axpy")(self.view2d(), alpha, other.view2d())

    def dot(self, other: "Dense") -> np.ndarray:
        """Columnwise inner products, shape (cols,)."""
        self._check_same_shape(other)
        return dispatch(self._executor, "dot")(self.view2d(), other.view2d())

    def norm2(self) -> np.ndarray:
        """Columnwise Euclidean norms, shape (cols,)."""
        return dispatch(self._executor, "norm2")(self.view2d())

    def copy(self) -> "Dense":
        """Compact owning copy (stride == cols). Counted."""
        rows, cols = self._size
        out = Dense.create(self._executor, self._size)
        dispatch(self._executor, "copy")(out.view2d(), self.view2d())
        _count_elements(rows * cols)
        return out

    def _check_same_shape(self, other: "Dense") -> None:
        if not isinstance(other, Dense):
            raise InvalidArgumentError(f"expected a Dense operand, got {type(other).__name__}")
        if other.size != self._size:
            raise DimensionError(f"shape mismatch: {self._size} vs {other.size}")

    def _apply(self, b: "Dense", x: "Dense") -> None:
        dispatch(self._executor, "dense_apply")(self.view2d(), b.view2d(), x.view2d())

    def _advanced_apply(self, alpha: float, b: "Dense", beta: float, x: "Dense") -> None:
        dispatch(self._executor, "dense_apply_advanced")(
            self.view2d(), alpha, b.view2d(), beta, x.view2d()
        )


class Csr(LinOp):
    """Compressed-sparse-row matrix.

    Within each row the stored column indices are strictly increasing and
    duplicate-free; :meth:`from_data` establishes that normal form by sorting
    and summing duplicates.  Indices are int64, values float64.
    """

    def __init__(
        self,
        executor: Executor,
        size,
        row_ptrs: Array,
        col_idxs: Array,
        values: Array,
        validate: bool = True,
    ):
        super().__init__(executor, size)
        self._row_ptrs = row_ptrs
        self._col_idxs = col_idxs
        self._values = values
        self._row_ids_cache: np.ndarray | None = None
        if validate:
            self._validate()

    # -- construction --------------------------------------------------------

    @classmethod
    def from_data(cls, executor: Executor, data: MatrixData) -> "Csr":
        """Convert an assembly buffer to CSR normal form.

        Sorts entries by (row, col), sums duplicates in insertion order, and
        keeps explicit entries even when the sum is zero.  Counted as one
        matrix conversion.
        """
        rows, cols = data.size
        nnz = len(data.nonzeros)
        if nnz:
            r = np.fromiter((t[0] for t in data.nonzeros), dtype=np.int64, count=nnz)
            c = np.fromiter((t[1] for t in data.nonzeros), dtype=np.int64, count=nnz)
            v = np.fromiter((t[2] for t in data.nonzeros), dtype=np.float64, count=nnz)
            order = np.lexsort((c, r))  # stable, so duplicates keep insertion order
            r, c, v = r[order], c[order], v[order]
            first = np.empty(nnz, dtype=bool)
            first[0] = True
            first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            group = np.cumsum(first) - 1
            vals = np.bincount(group, weights=v)
            rr, cc = r[first], c[first]
            counts = np.bincount(rr, minlength=rows)
        else:
            vals = np.zeros(0)
            cc = np.zeros(0, dtype=np.int64)
            counts = np.zeros(rows, dtype=np.int64)
        row_ptrs = np.zeros(rows + 1, dtype=np.int64)
        np.cumsum(counts, out=row_ptrs[1:])
        _count_conversion()
        return cls(
            executor,
            data.size,
            Array(executor, row_ptrs, Ownership.OWNING),
            Array(executor, cc.astype(np.int64, copy=False), Ownership.OWNING),
            Array(executor, vals, Ownership.OWNING),
            validate=False,
        )

    @classmethod
    def from_arrays(cls, executor: Executor, size, row_ptrs, col_idxs, values) -> "Csr":
        """Build from raw CSR arrays (copied and validated)."""
        return cls(
            executor,
            size,
            Array(executor, np.array(row_ptrs, dtype=np.int64), Ownership.OWNING),
            Array(executor, np.array(col_idxs, dtype=np.int64), Ownership.OWNING),
            Array(executor, np.array(values, dtype=np.float64), Ownership.OWNING),
        )

    def _validate(self) -> None:
        rows, cols = self._size
        rp = self._row_ptrs.numpy()
        ci = self._col_idxs.numpy()
        if rp.shape[0] != rows + 1 or rp[0] != 0:
            raise InvalidArgumentError("row_ptrs must have rows+1 entries starting at 0")
        if np.any(np.diff(rp) < 0):
            raise InvalidArgumentError("row_ptrs must be non-decreasing")
        nnz = int(rp[-1])
        if ci.shape[0] != nnz or self._values.size != nnz:
            raise InvalidArgumentError(
                f"col_idxs/values length must match row_ptrs[-1] == {nnz}"
            )
        if nnz:
            if ci.min() < 0 or ci.max() >= cols:
                raise InvalidArgumentError(f"column index outside [0, {cols})")
            inner = np.ones(nnz - 1, dtype=bool)
            boundaries = rp[1:-1] - 1  # last entry of each non-final row
            inner[boundaries[(boundaries >= 0) & (boundaries < nnz - 1)]] = False
            if np.any(np.diff(ci)[inner] <= 0):
                raise InvalidArgumentError("column indices must increase within each row")

    # -- raw access -----------------------------------------------------------

    @property
    def num_stored_elements(self) -> int:
        return self._values.size

    def get_values(self, const: bool = False) -> Array:
        """Borrowed handle to the stored values (writes hit the matrix)."""
        return array_view(self._executor, self._values.size, self._values.numpy(), const=const)

    def get_row_ptrs(self) -> Array:
        return array_view(
            self._executor, self._row_ptrs.size, self._row_ptrs.numpy(), const=True
        )

    def get_col_idxs(self) -> Array:
        return array_view(
            self._executor, self._col_idxs.size, self._col_idxs.numpy(), const=True
        )

    def update_values(self, new_values) -> None:
        """Replace the stored values, keeping the sparsity pattern.

        The length is checked before anything is written, so a failed update
        leaves the matrix untouched.
        """
        arr = np.asarray(new_values, dtype=np.float64).reshape(-1)
        if arr.shape[0] != self._values.size:
            raise DimensionError(
                f"expected {self._values.size} values, got {arr.shape[0]}"
            )
        self._values.numpy()[:] = arr

    def write_data(self) -> MatrixData:
        """The stored entries as an assembly buffer (row-major, sorted columns)."""
        out = MatrixData(self._size)
        rp = self._row_ptrs.numpy()
        ci = self._col_idxs.numpy()
        v = self._values.numpy()
        for i in range(self._size.rows):
            for p in range(int(rp[i]), int(rp[i + 1])):
                out.add(i, int(ci[p]), float(v[p]))
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self._size)
        dense[self._row_ids(), self._col_idxs.numpy()] = self._values.numpy()
        return dense

    def _row_ids(self) -> np.ndarray:
        if self._row_ids_cache is None:
            rp = self._row_ptrs.numpy()
            self._row_ids_cache = np.repeat(
                np.arange(self._size.rows, dtype=np.int64), np.diff(rp)
            )
        return self._row_ids_cache

    # -- application ----------------------------------------------------------

    def _apply(self, b: "Dense", x: "Dense") -> None:
        dispatch(self._executor, "spmv")(
            self._row_ptrs.numpy(),
            self._row_ids(),
            self._col_idxs.numpy(),
            self._values.numpy(),
            b.view2d(),
            x.view2d(),
        )

    def _advanced_apply(self, alpha: float, b: "Dense", beta: float, x: "Dense") -> None:
        dispatch(self._executor, "spmv_advanced")(
            self._row_ptrs.numpy(),
            self._row_ids(),
            self._col_idxs.numpy(),
            self._values.numpy(),
            alpha,
            b.view2d(),
            beta,
            x.view2d(),
        )
