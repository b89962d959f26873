import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from socgcf.sparse import (SparseMatrix, bipartite_normalize, load_coo, nnz_degrees, save_coo,
                           spmm, sym_normalize, transpose)


def sparse_dense(draw_shape=(st.integers(1, 9), st.integers(1, 9))):
    @st.composite
    def build(draw):
        n, m = draw(draw_shape[0]), draw(draw_shape[1])
        mask = draw(arrays(np.bool_, (n, m)))
        vals = draw(arrays(np.float64, (n, m), elements=st.floats(-5, 5, allow_nan=False)))
        return np.where(mask, vals, 0.0)
    return build()


def test_from_coo_sums_duplicates_and_drops_zeros():
    a = SparseMatrix.from_coo([1, 0, 1, 0], [2, 1, 2, 0], [1.5, 2.0, 0.5, 0.0], (2, 3))
    assert a.nnz == 2
    assert a.row_offsets.tolist() == [0, 1, 2]
    assert a.col_indices.tolist() == [1, 2]
    assert a.values.tolist() == [2.0, 2.0]


def test_arrays_are_read_only():
    a = SparseMatrix.from_dense(np.eye(3))
    with pytest.raises(ValueError):
        a.values[0] = 5.0


def test_rejects_bad_invariants():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, np.array([0, 1, 1]), np.array([5]), np.array([1.0]))
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, np.array([0, 2, 2]), np.array([1, 0]), np.array([1.0, 1.0]))


def test_spmm_dimension_mismatch():
    with pytest.raises(ValueError):
        spmm(SparseMatrix.zeros(2, 3), np.ones((4, 2)))


def test_empty_rows_give_zero_output():
    a = SparseMatrix.from_coo([2], [0], [3.0], (4, 2))
    out = spmm(a, np.array([[1.0, 2.0], [5.0, 7.0]]))
    assert out.tolist() == [[0, 0], [0, 0], [3, 6], [0, 0]]


@settings(max_examples=60, deadline=None)
@given(sparse_dense(), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_spmm_matches_dense(a, d, seed):
    b = np.random.default_rng(seed).normal(size=(a.shape[1], d))
    got = spmm(SparseMatrix.from_dense(a), b)
    np.testing.assert_allclose(got, a @ b, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(sparse_dense())
def test_transpose_is_involution_and_matches_dense(a):
    s = SparseMatrix.from_dense(a)
    t = transpose(s)
    assert np.array_equal(t.to_dense(), a.T)
    assert transpose(t).equals(s)


def test_sym_normalize_hand_values():
    # path graph 0-1-2: degrees 1, 2, 1
    a = SparseMatrix.from_coo([0, 1, 1, 2], [1, 0, 2, 1], [1.0] * 4, (3, 3))
    n = sym_normalize(a).to_dense()
    w = 1 / math.sqrt(2)
    assert np.allclose(n, [[0, w, 0], [w, 0, w], [0, w, 0]], atol=0, rtol=1e-15)


def test_sym_normalize_degree_counts_entries_not_weights():
    a = SparseMatrix.from_coo([0, 1], [1, 0], [0.5, 0.5], (2, 2))
    assert sym_normalize(a).values.tolist() == [0.5, 0.5]


def test_sym_normalize_requires_square():
    with pytest.raises(ValueError):
        sym_normalize(SparseMatrix.zeros(2, 3))


def test_bipartite_normalize_hand_values():
    # user 0 -> items 0,1 ; user 1 -> item 1
    r = SparseMatrix.from_coo([0, 0, 1], [0, 1, 1], [1.0] * 3, (2, 2))
    n = bipartite_normalize(r).to_dense()
    expected = [[1 / math.sqrt(2 * 1), 1 / math.sqrt(2 * 2)], [0, 1 / math.sqrt(1 * 2)]]
    np.testing.assert_allclose(n, expected, rtol=1e-15)
    assert nnz_degrees(r, "rows").tolist() == [2, 1]
    assert nnz_degrees(r, "cols").tolist() == [1, 2]


@settings(max_examples=40, deadline=None)
@given(sparse_dense())
def test_normalized_entries_bounded(a):
    r = SparseMatrix.from_dense(np.abs(a) > 0)
    n = bipartite_normalize(r)
    assert np.all(n.values > 0) and np.all(n.values <= 1.0)


def test_coo_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(4)
    a = SparseMatrix.from_dense(np.where(rng.random((7, 5)) < 0.4, rng.normal(size=(7, 5)), 0.0))
    save_coo(a, tmp_path / "a.coo")
    b = load_coo(tmp_path / "a.coo")
    assert a.equals(b)
    assert (tmp_path / "a.coo").read_text().splitlines()[0] == f"7 5 {a.nnz}"
