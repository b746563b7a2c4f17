"""Matrix storage, Matrix Market I/O, permutation, scatter/gather."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rschol as rs
from rschol.errors import (
    MissingDiagonal,
    NonPositiveDiagonal,
    NotSubset,
    NotSymmetric,
    ParseError,
)

from conftest import random_spd


def write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestMatrixMarket:
    def test_single_entry(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 4.0\n")
        A = rs.read_matrix_market(p)
        assert A.n == 1 and np.allclose(A.values, [4.0])

    def test_2x2(self, tmp_path):
        p = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "2 2 3\n1 1 4\n2 1 2\n2 2 3\n",
        )
        A = rs.read_matrix_market(p)
        assert np.allclose(A.dense(), [[4, 2], [2, 3]])

    def test_general_header_rejected(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 4\n")
        with pytest.raises(NotSymmetric):
            rs.read_matrix_market(p)

    def test_upper_entries_mirrored(self, tmp_path):
        p = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "2 2 3\n1 1 4\n1 2 2\n2 2 3\n",
        )
        A = rs.read_matrix_market(p)
        assert np.allclose(A.dense(), [[4, 2], [2, 3]])

    def test_duplicates_summed(self, tmp_path):
        p = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "2 2 4\n1 1 4\n2 1 1\n2 1 1\n2 2 3\n",
        )
        A = rs.read_matrix_market(p)
        assert A.dense()[1, 0] == 2.0

    def test_missing_diagonal(self, tmp_path):
        p = write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 1\n")
        with pytest.raises(MissingDiagonal):
            rs.read_matrix_market(p)

    def test_nonpositive_diagonal(self, tmp_path):
        p = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 -4\n2 2 1\n",
        )
        with pytest.raises(NonPositiveDiagonal):
            rs.read_matrix_market(p)

    @pytest.mark.parametrize(
        "body",
        [
            "junk\n1 1 1\n1 1 4\n",
            "%%MatrixMarket matrix array real symmetric\n1 1\n4\n",
            "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 4 0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 4\n",
            "%%MatrixMarket matrix coordinate real symmetric\n1 1 2\n1 1 4\n",
            "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n5 1 4\n",
            "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 zz\n",
        ],
    )
    def test_malformed(self, tmp_path, body):
        with pytest.raises(ParseError):
            rs.read_matrix_market(write(tmp_path, body))

    def test_write_read_idempotent(self, tmp_path):
        A = random_spd(17, seed=2)
        p = tmp_path / "round.mtx"
        rs.write_matrix_market(A, p)
        B = rs.read_matrix_market(p)
        assert np.array_equal(A.col_ptr, B.col_ptr)
        assert np.array_equal(A.row_idx, B.row_idx)
        assert np.array_equal(A.values, B.values)
        q = tmp_path / "round2.mtx"
        rs.write_matrix_market(B, q)
        assert p.read_text() == q.read_text()


class TestPermutation:
    def test_identity(self):
        A = random_spd(9, seed=0)
        B = rs.permute_symmetric(A, rs.Permutation.identity(9))
        assert np.array_equal(A.col_ptr, B.col_ptr)
        assert np.array_equal(A.row_idx, B.row_idx)
        assert np.array_equal(A.values, B.values)

    def test_2x2_swap(self):
        A = rs.SparseSpdMatrix.from_dense(np.array([[4.0, 2.0], [2.0, 3.0]]))
        B = rs.permute_symmetric(A, rs.Permutation(np.array([1, 0])))
        assert np.allclose(B.dense(), [[3, 2], [2, 4]])

    def test_round_trip(self):
        A = random_spd(10, seed=4)
        rng = np.random.default_rng(1)
        P = rs.Permutation(rng.permutation(10))
        B = rs.permute_symmetric(A, P)
        C = rs.permute_symmetric(B, rs.Permutation(P.inverse))
        assert np.array_equal(A.row_idx, C.row_idx)
        assert np.allclose(A.values, C.values)

    def test_preserves_value_multisets(self):
        A = random_spd(12, seed=7)
        P = rs.Permutation(np.random.default_rng(3).permutation(12))
        B = rs.permute_symmetric(A, P)
        assert np.allclose(np.sort(A.values), np.sort(B.values))
        assert np.allclose(np.sort(A.diagonal()), np.sort(B.diagonal()))

    def test_forward_inverse_identity(self):
        P = rs.Permutation(np.random.default_rng(0).permutation(31))
        assert np.array_equal(P.forward[P.inverse], np.arange(31))
        assert np.array_equal(P.inverse[P.forward], np.arange(31))


class TestScatterGather:
    def test_pinned_example(self):
        out = rs.scatter_rows(np.array([[1.0, 2.0], [3.0, 4.0]]), [3, 8], [2, 3, 5, 8])
        assert np.array_equal(out, [[0, 0], [1, 2], [0, 0], [3, 4]])
        back = rs.gather_rows(out, [2, 3, 5, 8], [3, 8])
        assert np.array_equal(back, [[1, 2], [3, 4]])

    def test_identity_case(self):
        B = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(rs.scatter_rows(B, [1, 4, 9], [1, 4, 9]), B)
        assert np.array_equal(rs.gather_rows(B, [1, 4, 9], [1, 4, 9]), B)

    def test_empty(self):
        out = rs.scatter_rows(np.zeros((0, 3)), [], [2, 5])
        assert out.shape == (2, 3) and not out.any()

    def test_not_subset(self):
        with pytest.raises(NotSubset):
            rs.scatter_rows(np.zeros((2, 1)), [1, 7], [1, 2, 3])
        with pytest.raises(NotSubset):
            rs.gather_rows(np.zeros((3, 1)), [1, 2, 3], [0])

    def test_columns_and_combined(self):
        B = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = rs.scatter_columns(B, [0, 2], [0, 1, 2])
        assert np.array_equal(out, [[1, 0, 2], [3, 0, 4]])
        both = rs.scatter(B, [1, 2], [0, 1, 2], [0, 2], [0, 1, 2])
        assert np.array_equal(both, [[0, 0, 0], [1, 0, 2], [3, 0, 4]])

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_round_trip_property(self, data):
        k = data.draw(st.integers(1, 12))
        universe = data.draw(
            st.lists(st.integers(0, 50), min_size=k, max_size=30, unique=True)
        )
        r2 = np.sort(np.array(universe, dtype=np.int64))
        sub_idx = data.draw(
            st.lists(st.integers(0, len(r2) - 1), min_size=1, max_size=len(r2), unique=True)
        )
        r1 = np.sort(r2[np.array(sub_idx)])
        B = np.random.default_rng(k).standard_normal((len(r1), 3))
        assert np.array_equal(rs.gather_rows(rs.scatter_rows(B, r1, r2), r2, r1), B)
