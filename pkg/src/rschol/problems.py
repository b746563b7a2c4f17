"""Desk-scale SPD test problem generators (matrix plus vertex coordinates).

All generators are deterministic for fixed parameters.  Boundary
conditions are Dirichlet (eliminated), so every matrix is positive
definite outright.
"""

import numpy as np

from .ordering import IndexCoordinates
from .sparse import SparseSpdMatrix

__all__ = ["laplacian_2d", "laplacian_3d", "aniso_poisson_3d", "elasticity_3d"]


def _grid_indices(*dims):
    """Lexicographic index array over a dims grid (last axis fastest)."""
    return np.arange(int(np.prod(dims))).reshape(dims)


def laplacian_2d(N):
    """5-point Dirichlet Laplacian on an N x N grid (diagonal 4)."""
    if N < 2:
        raise ValueError("N must be at least 2")
    idx = _grid_indices(N, N)
    rows, cols, vals = [], [], []
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(np.full(N * N, 4.0))
    for shift_axis in (0, 1):
        a = idx.take(range(1, N), axis=shift_axis).ravel()
        b = idx.take(range(0, N - 1), axis=shift_axis).ravel()
        rows.append(np.maximum(a, b))
        cols.append(np.minimum(a, b))
        vals.append(np.full(a.size, -1.0))
    A = SparseSpdMatrix.from_coo(
        N * N, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )
    x, y = np.unravel_index(np.arange(N * N), (N, N))
    coords = IndexCoordinates(
        np.column_stack([x, y, np.zeros(N * N)]).astype(float), source="geometric-file"
    )
    return A, coords


def laplacian_3d(N):
    """7-point Dirichlet Laplacian on an N^3 grid (diagonal 6)."""
    if N < 2:
        raise ValueError("N must be at least 2")
    idx = _grid_indices(N, N, N)
    n = N**3
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [np.full(n, 6.0)]
    for axis in (0, 1, 2):
        a = idx.take(range(1, N), axis=axis).ravel()
        b = idx.take(range(0, N - 1), axis=axis).ravel()
        rows.append(np.maximum(a, b))
        cols.append(np.minimum(a, b))
        vals.append(np.full(a.size, -1.0))
    A = SparseSpdMatrix.from_coo(
        n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )
    x, y, z = np.unravel_index(np.arange(n), (N, N, N))
    coords = IndexCoordinates(np.column_stack([x, y, z]).astype(float), source="geometric-file")
    return A, coords


def aniso_poisson_3d(N, K=None, contrast=1.0):
    """Anisotropic, optionally inhomogeneous diffusion on an N^3 grid.

    Discretizes the quadratic form  sum_v c(v) g_v^T K g_v  where g_v is
    the vector of forward differences at vertex v (Dirichlet ghosts at
    the domain boundary) and c jumps to ``contrast`` inside the centered
    half-width box.  SPD for any SPD tensor K by construction; with K = I
    and contrast 1 it reproduces :func:`laplacian_3d` exactly.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    K = np.eye(3) if K is None else np.asarray(K, dtype=np.float64)
    if K.shape != (3, 3) or not np.allclose(K, K.T):
        raise ValueError("K must be a symmetric 3x3 tensor")
    if np.any(np.linalg.eigvalsh(K) <= 0):
        raise ValueError("K must be positive definite")
    if contrast <= 0:
        raise ValueError("contrast must be positive")

    idx = _grid_indices(N, N, N)
    n = N**3
    x, y, z = np.unravel_index(np.arange(n), (N, N, N))
    lo, hi = N // 4, N // 4 + (N + 1) // 2
    inside = (
        (x >= lo) & (x < hi) & (y >= lo) & (y < hi) & (z >= lo) & (z < hi)
    )
    c = np.where(inside, float(contrast), 1.0)

    # stencil of the form at vertex v: rows of g_v are u(v+e_a) - u(v),
    # with u = 0 beyond the far faces; near faces contribute single-axis
    # boundary differences u(face) - 0.
    shifts = np.empty((3, n), dtype=np.int64)
    valid = np.empty((3, n), dtype=bool)
    pos = (x, y, z)
    for a in range(3):
        p = pos[a]
        valid[a] = p < N - 1
        stepped = [x, y, z]
        stepped[a] = np.minimum(p + 1, N - 1)
        shifts[a] = idx[tuple(stepped)]

    rows, cols, vals = [], [], []
    base = np.arange(n)

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for a in range(3):
        for b in range(3):
            if K[a, b] == 0.0:
                continue
            w = c * K[a, b]
            # (u_{v+a} - u_v)(u_{v+b} - u_v): four index pairs, ghosts drop
            va, vb = valid[a], valid[b]
            sa, sb = shifts[a], shifts[b]
            m = va & vb
            add(sa[m], sb[m], w[m])
            add(sa[va], base[va], -w[va])
            add(base[vb], sb[vb], -w[vb])
            add(base, base, w)
    # near-boundary half-edges: difference u(face) - ghost along each axis
    for a in range(3):
        face = pos[a] == 0
        add(base[face], base[face], (c * K[a, a])[face])

    r = np.concatenate(rows)
    q = np.concatenate(cols)
    v = np.concatenate(vals)
    rr = np.maximum(r, q)
    cc = np.minimum(r, q)
    # each off-diagonal pair (i,j),(j,i) was generated once per orientation;
    # folding both onto the lower triangle would double it, so halve
    v = np.where(rr != cc, 0.5 * v, v)
    A = SparseSpdMatrix.from_coo(n, rr, cc, v)
    coords = IndexCoordinates(np.column_stack([x, y, z]).astype(float), source="geometric-file")
    return A, coords


def _hex_element_stiffness(h, lam, mu):
    """8-node hexahedral stiffness (edge length h), 2x2x2 Gauss points."""
    gp = np.array([-1.0, 1.0]) / np.sqrt(3.0)
    corners = np.array(
        [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64
    )
    signs = 2.0 * corners - 1.0  # natural coordinates of the corners
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2.0 * mu
    D[3:, 3:] = mu * np.eye(3)
    Ke = np.zeros((24, 24))
    detJ = (h / 2.0) ** 3
    for gx in gp:
        for gy in gp:
            for gz in gp:
                g = np.array([gx, gy, gz])
                dN = np.empty((8, 3))
                for a in range(3):
                    term = np.ones(8)
                    for bb in range(3):
                        if bb == a:
                            term = term * (signs[:, bb] / 2.0)
                        else:
                            term = term * ((1.0 + signs[:, bb] * g[bb]) / 2.0)
                    dN[:, a] = term
                dN = dN * (2.0 / h)  # d(natural)/d(physical)
                B = np.zeros((6, 24))
                for node in range(8):
                    bx, by, bz = dN[node]
                    col = 3 * node
                    B[0, col] = bx
                    B[1, col + 1] = by
                    B[2, col + 2] = bz
                    B[3, col + 1] = bz
                    B[3, col + 2] = by
                    B[4, col] = bz
                    B[4, col + 2] = bx
                    B[5, col] = by
                    B[5, col + 1] = bx
                Ke += B.T @ D @ B * detJ
    return Ke, corners


def elasticity_3d(N, young=1.0, poisson=0.3):
    """Linear elasticity on an N^3 node hex grid, x=0 face clamped.

    Three displacement unknowns per free node; trilinear brick elements
    with identical stiffness assembled by translation.  Clamped-face
    degrees of freedom are eliminated, so the matrix is SPD.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = young / (2 * (1 + poisson))
    h = 1.0 / (N - 1)
    Ke, corners = _hex_element_stiffness(h, lam, mu)

    node_idx = _grid_indices(N, N, N)
    free = np.full(N**3, -1, dtype=np.int64)
    free_nodes = np.nonzero(np.unravel_index(np.arange(N**3), (N, N, N))[0] > 0)[0]
    free[free_nodes] = np.arange(free_nodes.size)
    ndof = 3 * free_nodes.size

    e = N - 1
    ex, ey, ez = np.meshgrid(range(e), range(e), range(e), indexing="ij")
    ex, ey, ez = ex.ravel(), ey.ravel(), ez.ravel()
    elem_nodes = np.empty((ex.size, 8), dtype=np.int64)
    for a, (ci, cj, ck) in enumerate(corners.astype(int)):
        elem_nodes[:, a] = node_idx[ex + ci, ey + cj, ez + ck]
    elem_dofs = np.repeat(3 * free[elem_nodes], 3, axis=1)
    elem_dofs += np.tile(np.arange(3), 8)[None, :]
    elem_dofs[3 * free[elem_nodes].repeat(3, axis=1) < 0] = -1

    ii = np.repeat(elem_dofs, 24, axis=1).ravel()
    jj = np.tile(elem_dofs, (1, 24)).ravel()
    vv = np.tile(Ke.ravel(), ex.size)
    keep = (ii >= 0) & (jj >= 0) & (ii >= jj)
    A = SparseSpdMatrix.from_coo(ndof, ii[keep], jj[keep], vv[keep])

    x, y, z = np.unravel_index(free_nodes, (N, N, N))
    xyz = np.column_stack([x, y, z]).astype(float) * h
    coords = IndexCoordinates(np.repeat(xyz, 3, axis=0), source="geometric-file")
    return A, coords
