"""Batched solves: many small independent systems, one shared sparsity pattern.

A :class:`BatchCsr` stores one copy of the CSR structure and a (num_systems,
nnz) value block; a :class:`BatchDense` stacks the per-system vectors.  The
batched CG and BiCGStab below run all systems in lockstep with an active
mask, so each system performs exactly the update sequence the single-system
solver would, stops by its own criteria, and a breakdown in one system marks
that system failed without disturbing its siblings.

On parallel executors the batch is split into contiguous system ranges
through the ``run_partitioned`` kernel.  Block bodies touch only their own
slice of every array and use plain numpy internally (never the dispatched
kernels, which keeps the worker pool free of nested submissions), so the
partitioning cannot change any result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import Array, Dim, MatrixData, Ownership
from .errors import InvalidArgumentError
from .executor import Executor, dispatch
from .linop import Csr
from .solver import (
    DEFAULT_TOL_BREAKDOWN,
    Iteration,
    ResidualNorm,
    STOP_ITERATION,
    STOP_RESIDUAL,
)

STOP_BREAKDOWN = "breakdown"
STOP_SINGULAR_PRECONDITIONER = "singular_preconditioner"

BATCH_ALGORITHMS = ("cg", "bicgstab")


class BatchCsr:
    """A batch of CSR matrices sharing row_ptrs and col_idxs."""

    def __init__(self, executor: Executor, num_systems: int, size, row_ptrs, col_idxs, values):
        if num_systems < 0:
            raise InvalidArgumentError(f"num_systems must be >= 0, got {num_systems}")
        self._executor = executor
        self._num_systems = int(num_systems)
        self._size = Dim(int(size[0]), int(size[1]))
        self._row_ptrs = np.asarray(row_ptrs, dtype=np.int64)
        self._col_idxs = np.asarray(col_idxs, dtype=np.int64)
        self._values = np.asarray(values, dtype=np.float64)
        nnz = self._col_idxs.shape[0]
        if self._values.shape != (self._num_systems, nnz):
            raise InvalidArgumentError(
                f"values must have shape ({self._num_systems}, {nnz}), got {self._values.shape}"
            )
        self._row_ids = np.repeat(
            np.arange(self._size.rows, dtype=np.int64), np.diff(self._row_ptrs)
        )

    @classmethod
    def from_template(cls, executor: Executor, num_systems: int, template: MatrixData, per_system_values) -> "BatchCsr":
        """Build from a structure template plus per-system values.

        The template is converted once (sorted, duplicates summed); the value
        block must follow the converted ordering and hold num_systems * nnz
        entries, either flat or as a (num_systems, nnz) array.
        """
        structure = Csr.from_data(executor, template)
        nnz = structure.num_stored_elements
        vals = np.asarray(per_system_values, dtype=np.float64)
        if vals.size != num_systems * nnz:
            raise InvalidArgumentError(
                f"expected {num_systems} x {nnz} values, got {vals.size}"
            )
        return cls(
            executor,
            num_systems,
            structure.size,
            structure.get_row_ptrs().numpy(),
            structure.get_col_idxs().numpy(),
            vals.reshape(num_systems, nnz).copy(),
        )

    @property
    def executor(self) -> Executor:
        return self._executor

    @property
    def num_systems(self) -> int:
        return self._num_systems

    @property
    def size(self) -> Dim:
        return self._size

    @property
    def num_stored_elements(self) -> int:
        return self._col_idxs.shape[0]

    @property
    def row_ptrs(self) -> np.ndarray:
        return self._row_ptrs

    @property
    def col_idxs(self) -> np.ndarray:
        return self._col_idxs

    @property
    def values(self) -> np.ndarray:
        return self._values

    def extract_system(self, k: int) -> Csr:
        """System ``k`` as a Csr sharing this batch's storage (no copy)."""
        if not 0 <= k < self._num_systems:
            raise InvalidArgumentError(f"system {k} out of range for {self._num_systems}")
        return Csr(
            self._executor,
            self._size,
            Array(self._executor, self._row_ptrs, Ownership.BORROWED),
            Array(self._executor, self._col_idxs, Ownership.BORROWED),
            Array(self._executor, self._values[k], Ownership.BORROWED),
            validate=False,
        )


class BatchDense:
    """A batch of dense blocks, stored as one (num_systems, rows, cols) array."""

    def __init__(self, executor: Executor, num_systems: int, size, values: np.ndarray):
        self._executor = executor
        self._num_systems = int(num_systems)
        self._size = Dim(int(size[0]), int(size[1]))
        expected = (self._num_systems, self._size.rows, self._size.cols)
        if values.shape != expected:
            raise InvalidArgumentError(f"values must have shape {expected}, got {values.shape}")
        self._values = values

    @classmethod
    def zeros(cls, executor: Executor, num_systems: int, size) -> "BatchDense":
        size = Dim(int(size[0]), int(size[1]))
        return cls(executor, num_systems, size, np.zeros((num_systems, size.rows, size.cols)))

    @classmethod
    def from_values(cls, executor: Executor, values) -> "BatchDense":
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 3:
            raise InvalidArgumentError(f"expected a 3-D value array, got ndim={arr.ndim}")
        return cls(executor, arr.shape[0], Dim(arr.shape[1], arr.shape[2]), arr)

    @property
    def executor(self) -> Executor:
        return self._executor

    @property
    def num_systems(self) -> int:
        return self._num_systems

    @property
    def size(self) -> Dim:
        return self._size

    @property
    def values(self) -> np.ndarray:
        return self._values

    def system_view(self, k: int) -> np.ndarray:
        return self._values[k]


@dataclass
class BatchSolveReport:
    """Per-system outcome of a batched solve.

    ``stop_reasons[k]`` is ``"residual_norm"``, ``"iteration"``,
    ``"breakdown"`` or ``"singular_preconditioner"``; the last two mark the
    system failed while the rest of the batch ran to completion.
    """

    iterations: np.ndarray
    final_residual_norms: np.ndarray
    converged: np.ndarray
    stop_reasons: list

    @property
    def num_systems(self) -> int:
        return self.iterations.shape[0]


def batch_solve(algorithm, a, b, x, criteria, preconditioner=None) -> BatchSolveReport:
    """Solve A_k x_k = b_k for every system in the batch.

    Parameters
    ----------
    algorithm : str
        ``"cg"`` or ``"bicgstab"``.
    a : BatchCsr
    b, x : BatchDense
        One right-hand side per system (cols == 1); ``x`` supplies the
        initial guesses and receives the solutions.
    criteria : sequence of StoppingCriterion
        Evaluated per system against that system's own residual history.
    preconditioner : str or None
        ``"jacobi"`` or None.

    Returns
    -------
    BatchSolveReport
    """
    if algorithm not in BATCH_ALGORITHMS:
        raise InvalidArgumentError(
            f"unknown batched algorithm '{algorithm}'; valid: {', '.join(BATCH_ALGORITHMS)}"
        )
    if not isinstance(a, BatchCsr):
        raise InvalidArgumentError("batch_solve expects a BatchCsr system block")
    if a.size.rows != a.size.cols:
        raise InvalidArgumentError(f"system matrices must be square, got {a.size}")
    for vec, name in ((b, "b"), (x, "x")):
        if not isinstance(vec, BatchDense):
            raise InvalidArgumentError(f"{name} must be a BatchDense")
        if vec.num_systems != a.num_systems:
            raise InvalidArgumentError(
                f"{name} holds {vec.num_systems} systems, matrix batch holds {a.num_systems}"
            )
        if vec.size.cols != 1:
            raise InvalidArgumentError("batched solves support one right-hand side per system")
        if vec.size.rows != a.size.rows:
            raise InvalidArgumentError(
                f"{name} has {vec.size.rows} rows, systems have {a.size.rows}"
            )
    criteria = tuple(criteria)
    if not criteria:
        raise InvalidArgumentError("at least one stopping criterion is required")
    for crit in criteria:
        if not isinstance(crit, (Iteration, ResidualNorm)):
            raise InvalidArgumentError(f"unknown stopping criterion {crit!r}")
    if preconditioner not in (None, "none", "jacobi"):
        raise InvalidArgumentError(f"unknown preconditioner '{preconditioner}'; valid: jacobi")

    num = a.num_systems
    n = a.size.rows
    iters = np.zeros(num, dtype=np.int64)
    finals = np.zeros(num)
    conv = np.zeros(num, dtype=bool)
    reasons = np.empty(num, dtype=object)

    use_jacobi = preconditioner == "jacobi"
    diag_pos = _structural_diagonal(a) if use_jacobi else None

    bvals = b.values[:, :, 0]
    xvals = x.values[:, :, 0]
    block = _cg_block if algorithm == "cg" else _bicgstab_block

    def body(lo, hi):
        block(
            a._row_ids,
            a.col_idxs,
            n,
            a.values[lo:hi],
            bvals[lo:hi],
            xvals[lo:hi],
            criteria,
            diag_pos,
            DEFAULT_TOL_BREAKDOWN,
            iters[lo:hi],
            finals[lo:hi],
            conv[lo:hi],
            reasons[lo:hi],
        )

    dispatch(a.executor, "run_partitioned")(num, body)
    return BatchSolveReport(iters, finals, conv, list(reasons))


# --- block internals ----------------------------------------------------------


def _structural_diagonal(a: BatchCsr) -> np.ndarray:
    """Index of each row's diagonal entry in the shared pattern, or -1."""
    on_diag = a.col_idxs == a._row_ids
    pos = np.full(a.size.rows, -1, dtype=np.int64)
    pos[a._row_ids[on_diag]] = np.flatnonzero(on_diag)
    return pos


def _spmv_block(vals, row_ids, col_idxs, n, xb) -> np.ndarray:
    """Per-system SpMV; row sums accumulate left to right like the solo kernel."""
    m = xb.shape[0]
    prod = vals * xb[:, col_idxs]
    flat = (np.arange(m)[:, None] * n + row_ids[None, :]).ravel()
    return np.bincount(flat, weights=prod.ravel(), minlength=m * n).reshape(m, n)


def _rowdot(u, v) -> np.ndarray:
    return np.einsum("ij,ij->i", u, v)


def _rownorm(u) -> np.ndarray:
    return np.sqrt(_rowdot(u, u))


def _criteria_masks(criteria, k, r0, rk):
    res = np.zeros(r0.shape, dtype=bool)
    iteration_hit = False
    for crit in criteria:
        if isinstance(crit, ResidualNorm):
            res |= (r0 == 0.0) | (rk <= crit.reduction_factor * r0)
        else:
            iteration_hit = iteration_hit or (k >= crit.max_iters)
    return res, np.full(r0.shape, iteration_hit)


def _residual_only_mask(criteria, r0, rk):
    res = np.zeros(r0.shape, dtype=bool)
    for crit in criteria:
        if isinstance(crit, ResidualNorm):
            res |= (r0 == 0.0) | (rk <= crit.reduction_factor * r0)
    return res


def _record(mask, k, converged, reason, iters, conv, reasons, active):
    if mask.any():
        iters[mask] = k
        conv[mask] = converged
        reasons[mask] = reason
        active &= ~mask


def _cg_block(row_ids, col_idxs, n, vals, bv, xv, criteria, diag_pos,
              tol_breakdown, iters, finals, conv, reasons):
    m = bv.shape[0]
    active = np.ones(m, dtype=bool)

    invd = None
    if diag_pos is not None:
        invd, active = _jacobi_rows(row_ids, col_idxs, n, vals, bv, xv, diag_pos,
                                    iters, finals, conv, reasons, active)

    r = bv - _spmv_block(vals, row_ids, col_idxs, n, xv)
    r0 = _rownorm(r)
    rk = r0.copy()
    b_norm_sq = _rowdot(bv, bv)

    res0, it0 = _criteria_masks(criteria, 0, r0, rk)
    stopped = active & (res0 | it0)
    conv[stopped] = res0[stopped]
    reasons[stopped & res0] = STOP_RESIDUAL
    reasons[stopped & ~res0] = STOP_ITERATION
    iters[stopped] = 0
    active &= ~stopped

    z = r * invd if invd is not None else r.copy()
    p = z.copy()
    rho = _rowdot(r, z)
    k = 0
    while active.any():
        k += 1
        bd = active & (np.abs(rho) < tol_breakdown * b_norm_sq)
        _record(bd, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if not active.any():
            break
        q = _spmv_block(vals, row_ids, col_idxs, n, p)
        pq = _rowdot(p, q)
        bad = active & ((pq == 0.0) | ~np.isfinite(pq))
        _record(bad, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if not active.any():
            break
        alpha = np.zeros(m)
        np.divide(rho, pq, out=alpha, where=active)
        xv[active] += alpha[active, None] * p[active]
        r[active] -= alpha[active, None] * q[active]
        rk[active] = _rownorm(r[active])
        res, itr = _criteria_masks(criteria, k, r0, rk)
        done = active & (res | itr)
        conv[done] = res[done]
        reasons[done & res] = STOP_RESIDUAL
        reasons[done & ~res] = STOP_ITERATION
        iters[done] = k
        active &= ~done
        if not active.any():
            break
        if invd is not None:
            z[active] = r[active] * invd[active]
        else:
            z[active] = r[active]
        rho_new = rho.copy()
        rho_new[active] = _rowdot(r[active], z[active])
        beta = np.zeros(m)
        np.divide(rho_new, rho, out=beta, where=active & (rho != 0.0))
        p[active] = z[active] + beta[active, None] * p[active]
        rho = rho_new
    finals[...] = rk


def _bicgstab_block(row_ids, col_idxs, n, vals, bv, xv, criteria, diag_pos,
                    tol_breakdown, iters, finals, conv, reasons):
    m = bv.shape[0]
    active = np.ones(m, dtype=bool)

    invd = None
    if diag_pos is not None:
        invd, active = _jacobi_rows(row_ids, col_idxs, n, vals, bv, xv, diag_pos,
                                    iters, finals, conv, reasons, active)

    r = bv - _spmv_block(vals, row_ids, col_idxs, n, xv)
    rhat = r.copy()
    r0 = _rownorm(r)
    rk = r0.copy()
    b_norm_sq = _rowdot(bv, bv)

    res0, it0 = _criteria_masks(criteria, 0, r0, rk)
    stopped = active & (res0 | it0)
    conv[stopped] = res0[stopped]
    reasons[stopped & res0] = STOP_RESIDUAL
    reasons[stopped & ~res0] = STOP_ITERATION
    iters[stopped] = 0
    active &= ~stopped

    rho_prev = np.ones(m)
    alpha = np.ones(m)
    omega = np.ones(m)
    p = np.zeros_like(r)
    v = np.zeros_like(r)
    s = np.zeros_like(r)
    k = 0
    while active.any():
        k += 1
        rho = _rowdot(rhat, r)
        bd = active & (np.abs(rho) < tol_breakdown * b_norm_sq)
        _record(bd, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if k > 1:
            bd = active & (omega == 0.0)
            _record(bd, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if not active.any():
            break
        if k == 1:
            p[active] = r[active]
        else:
            # (rho / rho_prev) * (alpha / omega), factored exactly like the
            # single-system recurrence so the rounding matches.
            beta = np.zeros(m)
            np.divide(rho, rho_prev, out=beta, where=active & (rho_prev != 0.0))
            ao = np.zeros(m)
            np.divide(alpha, omega, out=ao, where=active & (omega != 0.0))
            beta *= ao
            p[active] = r[active] + beta[active, None] * (
                p[active] - omega[active, None] * v[active]
            )
        phat = p * invd if invd is not None else p
        v = _spmv_block(vals, row_ids, col_idxs, n, phat)
        rhat_v = _rowdot(rhat, v)
        bad = active & ((rhat_v == 0.0) | ~np.isfinite(rhat_v))
        _record(bad, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if not active.any():
            break
        alpha_new = alpha.copy()
        np.divide(rho, rhat_v, out=alpha_new, where=active)
        alpha = alpha_new
        s[active] = r[active] - alpha[active, None] * v[active]
        s_norm = rk.copy()
        s_norm[active] = _rownorm(s[active])
        half = active & _residual_only_mask(criteria, r0, s_norm)
        if half.any():
            xv[half] += alpha[half, None] * phat[half]
            r[half] = s[half]
            rk[half] = s_norm[half]
            _record(half, k, True, STOP_RESIDUAL, iters, conv, reasons, active)
        if not active.any():
            break
        shat = s * invd if invd is not None else s
        t = _spmv_block(vals, row_ids, col_idxs, n, shat)
        tt = _rowdot(t, t)
        bad = active & ((tt == 0.0) | ~np.isfinite(tt))
        _record(bad, k - 1, False, STOP_BREAKDOWN, iters, conv, reasons, active)
        if not active.any():
            break
        omega_new = omega.copy()
        np.divide(_rowdot(t, s), tt, out=omega_new, where=active)
        omega = omega_new
        xv[active] += alpha[active, None] * phat[active] + omega[active, None] * shat[active]
        r[active] = s[active] - omega[active, None] * t[active]
        rk[active] = _rownorm(r[active])
        res, itr = _criteria_masks(criteria, k, r0, rk)
        done = active & (res | itr)
        conv[done] = res[done]
        reasons[done & res] = STOP_RESIDUAL
        reasons[done & ~res] = STOP_ITERATION
        iters[done] = k
        active &= ~done
        rho_prev = rho
    finals[...] = rk


def _jacobi_rows(row_ids, col_idxs, n, vals, bv, xv, diag_pos,
                 iters, finals, conv, reasons, active):
    """Per-system inverse diagonals; systems with unusable diagonals stop here."""
    m = bv.shape[0]
    if (diag_pos < 0).any():
        dvals = np.zeros((m, n))
    else:
        dvals = vals[:, diag_pos]
    bad = active & (dvals == 0.0).any(axis=1)
    invd = np.zeros((m, n))
    np.divide(1.0, dvals, out=invd, where=dvals != 0.0)
    # Failed systems keep their initial residual as the final one; the block
    # epilogue writes it from rk, which never moves for inactive lanes.
    _record(bad, 0, False, STOP_SINGULAR_PRECONDITIONER, iters, conv, reasons, active)
    return invd, active
