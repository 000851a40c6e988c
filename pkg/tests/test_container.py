"""Storage ownership, view transparency, and the copy counters."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from linopkit.container import (
    Dim,
    MatrixData,
    Ownership,
    array_create,
    array_view,
    copy_stats,
    memory_copy,
    reset_copy_stats,
)
from linopkit.errors import InvalidArgumentError
from linopkit.linop import Csr, Dense


class TestArrayCreate:
    def test_owning_and_zeroed(self, ref):
        a = array_create(ref, 5)
        assert a.ownership is Ownership.OWNING
        assert a.size == 5 and len(a) == 5
        assert (a.numpy() == 0.0).all()
        assert a.dtype == np.float64

    def test_zero_length_allowed(self, ref):
        assert array_create(ref, 0).size == 0

    def test_negative_size_rejected(self, ref):
        with pytest.raises(InvalidArgumentError):
            array_create(ref, -1)


class TestArrayView:
    def test_writes_go_both_ways(self, ref):
        buf = np.arange(4.0)
        view = array_view(ref, 4, buf)
        assert view.ownership is Ownership.BORROWED
        view.numpy()[1] = 9.0
        assert buf[1] == 9.0
        buf[2] = -3.0
        assert view.numpy()[2] == -3.0

    def test_prefix_view(self, ref):
        buf = np.arange(6.0)
        view = array_view(ref, 3, buf)
        assert view.size == 3
        view.fill(7.0)
        assert list(buf) == [7.0, 7.0, 7.0, 3.0, 4.0, 5.0]

    def test_const_view_rejects_writes(self, ref):
        buf = np.arange(3.0)
        view = array_view(ref, 3, buf, const=True)
        assert view.ownership is Ownership.BORROWED_CONST
        with pytest.raises(ValueError):
            view.numpy()[0] = 1.0
        with pytest.raises(InvalidArgumentError, match="const"):
            view.fill(0.0)
        buf[0] = 5.0  # the original stays writable
        assert view.numpy()[0] == 5.0

    def test_refuses_inputs_that_would_need_conversion(self, ref):
        with pytest.raises(InvalidArgumentError, match="ndarray"):
            array_view(ref, 2, [1.0, 2.0])
        with pytest.raises(InvalidArgumentError, match="1-D contiguous"):
            array_view(ref, 2, np.zeros((2, 2)))
        with pytest.raises(InvalidArgumentError, match="1-D contiguous"):
            array_view(ref, 2, np.arange(8.0)[::2])

    def test_size_bounds(self, ref):
        buf = np.zeros(3)
        with pytest.raises(InvalidArgumentError):
            array_view(ref, 4, buf)
        with pytest.raises(InvalidArgumentError):
            array_view(ref, -1, buf)

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=32), min_size=1, max_size=50))
    def test_view_is_fully_transparent(self, values):
        from linopkit.executor import executor_from_name

        buf = np.array(values, dtype=np.float64)
        view = array_view(executor_from_name("reference"), len(values), buf)
        assert np.array_equal(view.numpy(), buf)
        view.numpy()[...] = view.numpy()[::-1].copy()
        assert np.array_equal(buf, np.array(values[::-1], dtype=np.float64))


class TestCopying:
    def test_memory_copy_is_owning_and_independent(self, ref):
        buf = np.arange(4.0)
        src = array_view(ref, 4, buf)
        dst = memory_copy(src, ref)
        assert dst.ownership is Ownership.OWNING
        assert np.array_equal(dst.numpy(), buf)
        dst.numpy()[0] = 99.0
        assert buf[0] == 0.0

    def test_copy_counters(self, ref, par):
        reset_copy_stats()
        buf = np.arange(8.0)
        view = array_view(ref, 8, buf)  # views are free
        assert copy_stats().element_copies == 0
        memory_copy(view, ref)
        assert copy_stats().element_copies == 8
        view.copy(par)  # explicit cross-backend copy counts too
        assert copy_stats().element_copies == 16
        assert copy_stats().matrix_conversions == 0

    def test_dense_copy_counts_elements(self, ref):
        reset_copy_stats()
        d = Dense.create(ref, (3, 2))
        d.copy()
        assert copy_stats().element_copies == 6

    def test_csr_conversion_counts_once(self, ref):
        reset_copy_stats()
        Csr.from_data(ref, MatrixData((2, 2), [(0, 0, 1.0)]))
        stats = copy_stats()
        assert stats.matrix_conversions == 1
        assert stats.element_copies == 0

    def test_stats_snapshot_is_detached(self, ref):
        reset_copy_stats()
        before = copy_stats()
        memory_copy(array_create(ref, 3), ref)
        assert before.element_copies == 0


class TestMatrixData:
    def test_insertion_order_kept(self):
        data = MatrixData((2, 2), [(1, 1, 3.0), (0, 0, 4.0)])
        data.add(0, 1, 1.0)
        assert list(data) == [(1, 1, 3.0), (0, 0, 4.0), (0, 1, 1.0)]
        assert len(data) == 3

    def test_bounds_checked(self):
        data = MatrixData((2, 3))
        with pytest.raises(InvalidArgumentError, match="outside"):
            data.add(2, 0, 1.0)
        with pytest.raises(InvalidArgumentError, match="outside"):
            data.add(0, -1, 1.0)

    def test_negative_dimensions_rejected(self):
        with pytest.raises(InvalidArgumentError):
            MatrixData((-1, 2))

    def test_dim_fields(self):
        d = Dim(3, 4)
        assert (d.rows, d.cols) == (3, 4)
        assert tuple(d) == (3, 4)
