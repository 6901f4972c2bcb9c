"""Sparse container invariants and libsvm round-trips."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedopt.data import (
    DataFormatError,
    SparseDataset,
    SparseExample,
    axpy_sparse,
    load_libsvm,
    save_libsvm,
    sparse_dot,
    zero_model,
)

from .conftest import densify, random_dataset


def tiny() -> SparseDataset:
    return SparseDataset([0, 2, 3, 3], [0, 2, 1], [1.0, -2.0, 0.5], [1, -1, 1], 3)


class TestValidation:
    def test_accepts_well_formed(self):
        ds = tiny()
        assert ds.n == 3
        assert ds.d == 3

    def test_rejects_empty(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0], [], [], [], 3)

    def test_rejects_nonpositive_dim(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 1], [0], [1.0], [1], 0)

    def test_rejects_bad_indptr(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 2, 1], [0, 1], [1.0, 1.0], [1, -1], 3)

    def test_rejects_unsorted_row(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 2], [2, 0], [1.0, 1.0], [1], 3)

    def test_rejects_duplicate_index_in_row(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 2], [1, 1], [1.0, 1.0], [1], 3)

    def test_rejects_out_of_range_index(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 1], [3], [1.0], [1], 3)

    def test_rejects_stored_zero(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 1], [0], [0.0], [1], 3)

    def test_rejects_nonfinite_value(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 1], [0], [np.inf], [1], 3)

    def test_rejects_bad_label(self):
        with pytest.raises(DataFormatError):
            SparseDataset([0, 1], [0], [1.0], [2], 3)

    def test_duplicate_indices_allowed_across_rows(self):
        ds = SparseDataset([0, 1, 2], [1, 1], [1.0, 2.0], [1, -1], 3)
        assert ds.n == 2


class TestAccessors:
    def test_example_view(self):
        ds = tiny()
        ex = ds.example(1)
        assert isinstance(ex, SparseExample)
        assert ex.label == -1
        np.testing.assert_array_equal(ex.indices, [1])
        np.testing.assert_array_equal(ex.values, [0.5])

    def test_empty_row(self):
        ex = tiny().example(2)
        assert ex.indices.size == 0

    def test_iter_matches_example(self):
        ds = tiny()
        for i, ex in enumerate(ds):
            ref = ds.example(i)
            np.testing.assert_array_equal(ex.indices, ref.indices)
            np.testing.assert_array_equal(ex.values, ref.values)
            assert ex.label == ref.label

    def test_row_sq_norms(self):
        ds = tiny()
        np.testing.assert_allclose(ds.row_sq_norms(), [5.0, 0.25, 0.0])

    def test_from_examples_round_trip(self):
        ds = tiny()
        rebuilt = SparseDataset.from_examples(list(ds), ds.d)
        assert rebuilt == ds


class TestHelpers:
    def test_sparse_dot(self):
        w = np.array([1.0, 2.0, 3.0])
        ex = tiny().example(0)
        assert sparse_dot(ex, w) == 1.0 * 1.0 + (-2.0) * 3.0

    def test_axpy_sparse(self):
        w = zero_model(3)
        ex = tiny().example(0)
        axpy_sparse(2.0, ex, w)
        np.testing.assert_allclose(w, [2.0, 0.0, -4.0])

    def test_axpy_bounds_check(self):
        w = zero_model(2)
        ex = SparseExample(np.array([5]), np.array([1.0]), 1)
        with pytest.raises(IndexError):
            axpy_sparse(1.0, ex, w)

    def test_zero_model(self):
        w = zero_model(4)
        assert w.dtype == np.float64
        np.testing.assert_array_equal(w, 0.0)


class TestLibsvmIO:
    def test_round_trip(self, rng, tmp_path):
        ds = random_dataset(rng, n=25, d=9)
        path = tmp_path / "data.libsvm"
        save_libsvm(ds, path)
        back = load_libsvm(path)
        assert back == ds

    def test_round_trip_exact_floats(self, tmp_path):
        vals = [1.0 / 3.0, np.nextafter(1.0, 2.0), 1e-300]
        ds = SparseDataset([0, 3], [0, 1, 2], vals, [1], 3)
        path = tmp_path / "data.libsvm"
        save_libsvm(ds, path)
        back = load_libsvm(path)
        np.testing.assert_array_equal(back.values, ds.values)

    def test_sidecar_dimension_wins_over_max_index(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("# d=7 n=1\n+1 1:1.0\n")
        assert load_libsvm(path).d == 7

    def test_expected_d_override(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 1:1.0\n")
        assert load_libsvm(path, expected_d=11).d == 11

    def test_without_sidecar_uses_max_index(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 3:1.0\n-1 1:2.0\n")
        assert load_libsvm(path).d == 3

    def test_zero_label_maps_to_negative(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("0 1:1.0\n1 2:1.0\n")
        np.testing.assert_array_equal(load_libsvm(path).labels, [-1, 1])

    def test_rejects_duplicate_feature(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 1:1.0 1:2.0\n")
        with pytest.raises(DataFormatError, match="line 1"):
            load_libsvm(path)

    def test_unsorted_features_are_sorted_on_load(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 3:1.0 1:2.0\n")
        ds = load_libsvm(path)
        np.testing.assert_array_equal(ds.indices, [0, 2])
        np.testing.assert_array_equal(ds.values, [2.0, 1.0])

    def test_rejects_index_beyond_expected(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 5:1.0\n")
        with pytest.raises(DataFormatError):
            load_libsvm(path, expected_d=3)

    def test_rejects_garbage_label(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("banana 1:1.0\n")
        with pytest.raises(DataFormatError, match="line 1"):
            load_libsvm(path)

    def test_rejects_nonfinite_value(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 1:nan\n")
        with pytest.raises(DataFormatError):
            load_libsvm(path)

    def test_error_reports_line_number(self, tmp_path):
        path = tmp_path / "data.libsvm"
        path.write_text("+1 1:1.0\n-1 2:oops\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_libsvm(path)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(min_value=1, max_value=30),
       d=st.integers(min_value=1, max_value=15),
       seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_libsvm_round_trip_property(tmp_path_factory, n, d, seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=n, d=d, max_nnz=min(d, 6))
    path = tmp_path_factory.mktemp("rt") / "data.libsvm"
    save_libsvm(ds, path)
    assert load_libsvm(path) == ds


def test_densify_agrees_with_example_view(rng):
    ds = random_dataset(rng, n=10, d=6)
    dense = densify(ds)
    for i, ex in enumerate(ds):
        np.testing.assert_array_equal(dense[i, ex.indices], ex.values)
        mask = np.ones(ds.d, dtype=bool)
        mask[ex.indices] = False
        np.testing.assert_array_equal(dense[i, mask], 0.0)
