"""Dense building blocks: Cholesky, triangular solves, QR, Gaussian sampling.

Everything here is a thin, contract-enforcing layer over LAPACK via scipy.
All factorization work in the solver is routed through these kernels.
"""

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import IndefiniteError, SingularDiagonal

__all__ = [
    "dense_cholesky",
    "tri_solve",
    "orthonormalize",
    "gaussian_matrix",
    "low_rank_approx",
]


def dense_cholesky(M):
    """Lower Cholesky factor of a symmetric matrix (lower triangle read).

    Raises :class:`IndefiniteError` carrying the index of the first
    non-positive pivot.  No perturbation is ever applied; indefiniteness
    is a hard event that the caller's restart policy handles.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("dense_cholesky needs a square matrix")
    if M.shape[0] == 0:
        return np.zeros((0, 0))
    c, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise IndefiniteError(int(info) - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return c


def tri_solve(L, B, transpose=False, side="left"):
    """Solve with a dense lower triangle.

    side="left":  L X = B       (or L^T X = B with transpose)
    side="right": X L = B       (or X L^T = B with transpose)
    """
    L = np.asarray(L, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if L.shape[0] and np.any(np.diag(L) == 0.0):
        raise SingularDiagonal("zero on triangular diagonal")
    if L.shape[0] == 0:
        return B.copy()
    if side == "left":
        return sla.solve_triangular(
            L, B, lower=True, trans=1 if transpose else 0, check_finite=False
        )
    if side == "right":
        # X L = B  <=>  L^T X^T = B^T ; X L^T = B  <=>  L X^T = B^T
        Xt = sla.solve_triangular(
            L, B.T, lower=True, trans=0 if transpose else 1, check_finite=False
        )
        return Xt.T
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def orthonormalize(G):
    """Orthonormal basis for the column space of G.

    Thin QR with column pivoting; numerically dependent columns are
    dropped, so the result can have fewer columns than the input.
    """
    G = np.asarray(G, dtype=np.float64)
    m, k = G.shape
    if k == 0 or m == 0:
        return np.zeros((m, 0))
    Q, R, _ = sla.qr(G, mode="economic", pivoting=True, check_finite=False)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return np.zeros((m, 0))
    rank = int(np.sum(d > max(m, k) * np.finfo(np.float64).eps * d[0]))
    return np.ascontiguousarray(Q[:, :rank])


def gaussian_matrix(m, n, seed):
    """Seeded m-by-n matrix of i.i.d. standard normals.

    The generator (PCG64) and sampling transform are fixed so the output
    is reproducible for identical (m, n, seed).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal((m, n))


def low_rank_approx(B, rank, power_iters=0, seed=0):
    """Randomized range-finder approximation B ~ V @ U.T for an explicit B.

    U has orthonormal columns spanning an approximate row space of B and
    V = B @ U is the projection onto it, so B - V U^T is an orthogonal
    remainder.  ``power_iters`` extra passes sharpen the sample when the
    singular values decay slowly.
    """
    B = np.asarray(B, dtype=np.float64)
    m, n = B.shape
    rank = min(rank, m, n)
    G = gaussian_matrix(m, rank, seed)
    G = B.T @ G
    for _ in range(power_iters):
        G = B @ G
        G = B.T @ G
    U = orthonormalize(G)
    V = B @ U
    return V, U
