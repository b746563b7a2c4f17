"""Shared helpers for the test suite."""

import numpy as np
import pytest

from rschol import SparseSpdMatrix, permute_symmetric
from rschol.problems import aniso_poisson_3d, elasticity_3d, laplacian_2d, laplacian_3d


def path_matrix(n):
    """Tridiagonal 1D Laplacian (path graph)."""
    D = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return SparseSpdMatrix.from_dense(D)


def random_spd(n, seed, density=0.3):
    """Random sparse-ish SPD matrix with unit-dominant diagonal."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    M = M @ M.T + n * np.eye(n)
    return SparseSpdMatrix.from_dense(M)


def symbolic_oracle(pattern):
    """Dense boolean Cholesky pattern of a symmetric sparsity pattern."""
    P = np.array(pattern, dtype=bool)
    n = P.shape[0]
    P = np.tril(P | P.T)
    np.fill_diagonal(P, True)
    for j in range(n):
        for k in range(j):
            if P[j, k]:
                P[j + 1 :, j] |= P[j + 1 :, k]
    return P


def factor_residual(A, F):
    """Relative Frobenius residual of the explicit factor against P A P^T."""
    L = F.dense_lower()
    B = permute_symmetric(A, F.perm)
    return np.linalg.norm(L @ L.T - B.dense()) / np.linalg.norm(A.dense())


@pytest.fixture(scope="session")
def lap2d_16():
    return laplacian_2d(16)


@pytest.fixture(scope="session")
def lap3d_6():
    return laplacian_3d(6)


@pytest.fixture(scope="session")
def lap3d_8():
    return laplacian_3d(8)


@pytest.fixture(scope="session")
def elasticity_small():
    return elasticity_3d(4)


DESK_INSTANCES = [
    ("lap2d-12", lambda: laplacian_2d(12)),
    ("lap2d-14", lambda: laplacian_2d(14)),
    ("lap3d-6", lambda: laplacian_3d(6)),
    ("aniso-6", lambda: aniso_poisson_3d(6, K=[[2.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.6]], contrast=10.0)),
    ("elastic-4", lambda: elasticity_3d(4)),
]
