"""Dense kernel contracts."""

import numpy as np
import pytest

import rschol as rs
from rschol.errors import IndefiniteError, SingularDiagonal


class TestDenseCholesky:
    def test_hand_2x2(self):
        L = rs.dense_cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(L, [[2, 0], [1, np.sqrt(2)]])

    def test_identity(self):
        assert np.array_equal(rs.dense_cholesky(np.eye(5)), np.eye(5))

    def test_indefinite_pivot_index(self):
        with pytest.raises(IndefiniteError) as e:
            rs.dense_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert e.value.pivot == 1

    def test_zero_pivot_rejected(self):
        with pytest.raises(IndefiniteError):
            rs.dense_cholesky(np.zeros((3, 3)))

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        for n in (1, 7, 23, 50):
            M = rng.standard_normal((n, n))
            M = M @ M.T + n * np.eye(n)
            L = rs.dense_cholesky(M)
            assert np.linalg.norm(L @ L.T - M) / np.linalg.norm(M) < 1e-12
            assert not np.triu(L, 1).any()

    def test_reads_lower_triangle_only(self):
        M = np.array([[4.0, 99.0], [2.0, 3.0]])
        L = rs.dense_cholesky(M)
        assert np.allclose(L, [[2, 0], [1, np.sqrt(2)]])


class TestTriSolve:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        assert np.allclose(rs.tri_solve(np.eye(3), B), B)

    def test_right_transpose_hand(self):
        X = rs.tri_solve(
            np.array([[2.0, 0.0], [1.0, 1.0]]), np.array([[2.0, 3.0]]),
            transpose=True, side="right",
        )
        assert np.allclose(X, [[1, 2]])

    @pytest.mark.parametrize("transpose", [False, True])
    @pytest.mark.parametrize("side", ["left", "right"])
    def test_residuals(self, transpose, side):
        rng = np.random.default_rng(5)
        L = np.tril(rng.standard_normal((6, 6))) + 6 * np.eye(6)
        B = rng.standard_normal((6, 6))
        X = rs.tri_solve(L, B, transpose=transpose, side=side)
        T = L.T if transpose else L
        res = X @ T - B if side == "right" else T @ X - B
        assert np.linalg.norm(res) / np.linalg.norm(B) < 1e-13

    def test_singular_diagonal(self):
        L = np.array([[1.0, 0.0], [3.0, 0.0]])
        with pytest.raises(SingularDiagonal):
            rs.tri_solve(L, np.ones((2, 1)))


class TestOrthonormalize:
    def test_already_orthonormal(self):
        Q0, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((8, 3)))
        Q = rs.orthonormalize(Q0)
        assert Q.shape == (8, 3)
        assert np.abs(Q.T @ Q - np.eye(3)).max() < 1e-13
        # same span
        assert np.linalg.norm(Q0 - Q @ (Q.T @ Q0)) < 1e-12

    def test_dependent_columns_dropped(self):
        e1 = np.zeros((4, 1))
        e1[0] = 1.0
        Q = rs.orthonormalize(np.hstack([e1, 2 * e1]))
        assert Q.shape == (4, 1)
        assert abs(abs(Q[0, 0]) - 1) < 1e-14

    def test_random_accuracy(self):
        G = np.random.default_rng(1).standard_normal((20, 5))
        Q = rs.orthonormalize(G)
        assert np.abs(Q.T @ Q - np.eye(5)).max() < 1e-13
        assert np.linalg.norm(G - Q @ (Q.T @ G)) / np.linalg.norm(G) < 1e-12

    def test_zero_input(self):
        assert rs.orthonormalize(np.zeros((5, 2))).shape == (5, 0)


class TestGaussian:
    def test_empty(self):
        assert rs.gaussian_matrix(0, 4, 1).shape == (0, 4)

    def test_deterministic(self):
        assert np.array_equal(rs.gaussian_matrix(7, 3, 99), rs.gaussian_matrix(7, 3, 99))
        assert not np.array_equal(rs.gaussian_matrix(7, 3, 99), rs.gaussian_matrix(7, 3, 98))

    def test_moments(self):
        x = rs.gaussian_matrix(10000, 1, 12345).ravel()
        assert abs(x.mean()) < 0.05
        assert 0.9 < x.var() < 1.1


class TestLowRankApprox:
    def test_exact_rank_recovery(self):
        rng = np.random.default_rng(2)
        B = np.outer(rng.standard_normal(30), rng.standard_normal(12))
        V, U = rs.low_rank_approx(B, rank=4, seed=0)
        assert np.linalg.norm(V @ U.T - B) / np.linalg.norm(B) < 1e-10

    def test_zero_matrix(self):
        V, U = rs.low_rank_approx(np.zeros((10, 6)), rank=3, seed=0)
        assert np.linalg.norm(V @ U.T) == 0.0

    def test_projection_structure(self):
        rng = np.random.default_rng(3)
        B = rng.standard_normal((25, 15))
        V, U = rs.low_rank_approx(B, rank=6, power_iters=1, seed=4)
        assert np.abs(U.T @ U - np.eye(U.shape[1])).max() < 1e-12
        assert np.linalg.norm(V - B @ U) < 1e-12
