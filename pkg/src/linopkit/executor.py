"""Execution backends and the kernel dispatch registry.

An :class:`Executor` is a small immutable handle that names a compute backend.
Performance-relevant routines ("kernels") are registered once per
:class:`ExecutorKind`; callers look the implementation up through
:func:`dispatch`, so the backend is a runtime property of the data rather than
an import-time property of the code.  No module outside this one and the
kernel definitions ever branches on the kind.

Two kinds exist.  ``reference`` executes kernels serially and serves as ground
truth; ``parallel`` runs them on an internal thread pool.  Parallel kernels
are written so their results do not depend on the worker count (see
``kernels.py`` for the rules that make this hold bitwise).
"""

from __future__ import annotations

import atexit
import os
import threading
from concurrent.futures import ThreadPoolExecutor as _ThreadPool
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable

from .errors import ConfigurationError, InvalidArgumentError, UnsupportedBackendError


class ExecutorKind(Enum):
    REFERENCE = "reference"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class Executor:
    """Backend handle. Equal executors are interchangeable everywhere."""

    kind: ExecutorKind
    worker_count: int = 1


_REFERENCE = Executor(ExecutorKind.REFERENCE, 1)

#: Accepted spellings for configuration strings, case sensitive.
EXECUTOR_NAMES = {
    "reference": ExecutorKind.REFERENCE,
    "parallel": ExecutorKind.PARALLEL,
}


def create_executor(kind: ExecutorKind, worker_count: int | None = None) -> Executor:
    """Build an executor of the given kind.

    ``worker_count`` must be >= 1 when given.  Reference executors ignore the
    value (they always run serially); parallel executors default to the host
    CPU count.
    """
    if worker_count is not None and worker_count < 1:
        raise InvalidArgumentError(f"worker_count must be >= 1, got {worker_count}")
    if kind is ExecutorKind.REFERENCE:
        return _REFERENCE
    if kind is ExecutorKind.PARALLEL:
        if worker_count is None:
            worker_count = os.cpu_count() or 1
        return Executor(ExecutorKind.PARALLEL, worker_count)
    raise InvalidArgumentError(f"unknown executor kind: {kind!r}")


def executor_from_name(name: str, worker_count: int | None = None) -> Executor:
    """Map a configuration string to an executor, or raise ConfigurationError."""
    try:
        kind = EXECUTOR_NAMES[name]
    except KeyError:
        valid = ", ".join(sorted(EXECUTOR_NAMES))
        raise ConfigurationError(f"unknown backend '{name}'; valid backends: {valid}") from None
    return create_executor(kind, worker_count)


def master(exec_: Executor) -> Executor:
    """The host-memory executor associated with ``exec_``.

    Both kinds already live on host memory, so this is the serial reference
    executor in every case, and masters of masters stay put.
    """
    return _REFERENCE


# --- kernel registry -------------------------------------------------------

_KERNELS: dict[tuple[str, ExecutorKind], Callable] = {}


def register_kernel(name: str, kind: ExecutorKind):
    """Class a function as the ``name`` kernel for executors of ``kind``."""

    def deco(fn):
        _KERNELS[(name, kind)] = fn
        return fn

    return deco


def dispatch(exec_: Executor, name: str) -> Callable:
    """Return the kernel ``name`` bound to ``exec_``.

    Unregistered combinations raise; there is deliberately no fallback to
    another kind, so a missing kernel surfaces loudly instead of silently
    running somewhere else.
    """
    fn = _KERNELS.get((name, exec_.kind))
    if fn is None:
        raise UnsupportedBackendError(
            f"kernel '{name}' is not registered for executor kind '{exec_.kind.value}'"
        )
    return partial(fn, exec_)


def registered_kernel_names() -> list[str]:
    return sorted({name for (name, _) in _KERNELS})


def kernel_registered(name: str, kind: ExecutorKind) -> bool:
    return (name, kind) in _KERNELS


# --- worker pools ----------------------------------------------------------
#
# Pools are shared per worker_count because executors carry no other state;
# kernels must derive chunk geometry from their inputs alone, never from the
# pool, so sharing cannot affect results.

_POOLS: dict[int, _ThreadPool] = {}
_POOL_LOCK = threading.Lock()


def worker_pool(exec_: Executor) -> _ThreadPool:
    with _POOL_LOCK:
        pool = _POOLS.get(exec_.worker_count)
        if pool is None:
            pool = _ThreadPool(max_workers=exec_.worker_count)
            _POOLS[exec_.worker_count] = pool
        return pool


def _shutdown_pools():
    with _POOL_LOCK:
        for pool in _POOLS.values():
            pool.shutdown(wait=False)
        _POOLS.clear()


atexit.register(_shutdown_pools)


def split_ranges(n: int, parts: int, min_chunk: int = 1) -> list[tuple[int, int]]:
    """Split ``range(n)`` into at most ``parts`` contiguous pieces.

    Pieces differ in length by at most one and, except possibly the last,
    contain at least ``min_chunk`` items.  The result depends only on the
    arguments, which keeps chunked writes reproducible.
    """
    if n <= 0:
        return []
    count = min(parts, max(1, n // max(1, min_chunk)))
    base, extra = divmod(n, count)
    ranges = []
    lo = 0
    for i in range(count):
        hi = lo + base + (1 if i < extra else 0)
        ranges.append((lo, hi))
        lo = hi
    return ranges
