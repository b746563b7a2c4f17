"""Interior blocks: exact subdomain factors with implicit coupling rows.

The compressed separators carve the domain into mutually disjoint
subdomains whose columns are contiguous after the dissection permutation.
Each such subdomain (an interior block) gets an exact sparse supernodal
factor of its diagonal part; the coupling rows into the separators above
it are never stored.  Products and sub-blocks of those rows are recovered
on demand from

    L(rows, C_B) = A(rows, C_B) L_B^{-T},

which costs sparse multiplies and two in-block triangular solves.
"""

import numpy as np

from .blocks import SupernodeFactor, UpdateSource
from .errors import ShapeMismatch
from .kernels import dense_cholesky, tri_solve

__all__ = [
    "InteriorBlock",
    "factor_interior_block",
    "interior_block_multiply",
    "interior_block_subrows",
]


class InteriorBlock:
    """Exact factor of one subdomain, columns ``[c0, c1)``.

    ``members`` are the supernode factors restricted to the block (their
    off-diagonal rows are truncated at ``c1``); ``off_rows`` is the union
    of the truncated-away rows and ``coupling`` the sparse A(off_rows,
    c0:c1) block kept for preconditioner application.
    """

    def __init__(self, block_id, c0, c1, members, off_rows, coupling):
        self.id = block_id
        self.c0 = c0
        self.c1 = c1
        self.members = members
        self.off_rows = off_rows
        self.coupling = coupling

    @property
    def ncols(self):
        return self.c1 - self.c0

    def solve(self, G, transpose=False):
        """Triangular solve with the in-block factor L_B (or its transpose)."""
        G = np.asarray(G, dtype=np.float64)
        vec = G.ndim == 1
        X = G.reshape(-1, 1).copy() if vec else G.copy()
        if X.shape[0] != self.ncols:
            raise ShapeMismatch(f"expected {self.ncols} rows, got {X.shape[0]}")
        if not transpose:
            for m in self.members:
                l0, l1 = m.c0 - self.c0, m.c1 - self.c0
                Y = tri_solve(m.diag, X[l0:l1])
                X[l0:l1] = Y
                nib = m.nrows_in_block
                if nib:
                    rpos = m.rows[:nib] - self.c0
                    X[rpos] -= m.offdiag @ Y
        else:
            for m in reversed(self.members):
                l0, l1 = m.c0 - self.c0, m.c1 - self.c0
                nib = m.nrows_in_block
                Y = X[l0:l1]
                if nib:
                    rpos = m.rows[:nib] - self.c0
                    Y = Y - m.offdiag.T @ X[rpos]
                X[l0:l1] = tri_solve(m.diag, Y, transpose=True)
        return X[:, 0] if vec else X

    def factor_rows(self, A, rows):
        """Dense rows L(rows, C_B) of the never-stored coupling block."""
        rows = np.asarray(rows, dtype=np.int64)
        full = A.to_csr_full()
        X = full[rows, self.c0 : self.c1].toarray()
        return self.solve(X.T, transpose=False).T

    def multiply(self, A, R, C, G, transpose=False):
        """Product L(R, C_B) L(C, C_B)^T @ G without forming either block."""
        if transpose:
            R, C = C, R
        G = np.asarray(G, dtype=np.float64)
        if G.shape[0] != len(C):
            raise ShapeMismatch("G row count must match |C|")
        full = A.to_csr_full()
        T = full[np.asarray(C, dtype=np.int64), self.c0 : self.c1].T @ G
        T = self.solve(T, transpose=False)
        T = self.solve(T, transpose=True)
        return full[np.asarray(R, dtype=np.int64), self.c0 : self.c1] @ T

    def stored_scalars(self):
        total = self.coupling.nnz
        for m in self.members:
            nc = m.ncols
            total += nc * (nc + 1) // 2 + nc * (m.nrows_in_block or 0)
        return total


def factor_interior_block(A, partition, member_ids, block_id=0):
    """Exact supernodal factorization of one interior block.

    ``member_ids`` must be consecutive supernodes whose columns are
    contiguous; their structures are truncated to the block's column
    range, which is lossless because the dissection ordering guarantees
    the block has no direct coupling to any other interior block.
    """
    member_ids = list(member_ids)
    c0 = partition.starts[member_ids[0]]
    c1 = partition.starts[member_ids[-1] + 1]
    full = A.to_csr_full()

    members = []
    by_id = {}
    buckets = {}
    for j in member_ids:
        j0, j1 = partition.cols(j)
        rows = partition.rows[j]
        nib = int(np.searchsorted(rows, c1))
        UD = full[j0:j1, j0:j1].toarray()
        UO = full[rows[:nib], j0:j1].toarray() if nib else np.zeros((0, j1 - j0))
        for k in sorted(buckets.get(j, ())):
            src = by_id[k]
            rk = src.rows[: src.nrows_in_block]
            lo, hi = np.searchsorted(rk, (j0, j1))
            cpos = rk[lo:hi] - j0
            Bd = src.offdiag[lo:hi]
            UD[np.ix_(cpos, cpos)] -= Bd @ Bd.T
            if hi < rk.shape[0] and nib:
                rpos = np.searchsorted(rows, rk[hi:])
                UO[np.ix_(rpos, cpos)] -= src.offdiag[hi:] @ Bd.T
            if hi < rk.shape[0]:
                t = partition.supernode_of(int(rk[hi]))
                buckets.setdefault(t, []).append(k)
        LD = dense_cholesky(UD)
        LO = tri_solve(LD, UO.T).T if nib else UO
        node = SupernodeFactor(
            j, int(j0), int(j1), rows, diag=LD, offdiag=LO,
            nrows_in_block=nib, interior_id=block_id,
        )
        members.append(node)
        by_id[j] = node
        if nib:
            t = partition.supernode_of(int(rows[0]))
            buckets.setdefault(t, []).append(j)

    tails = [m.rows[m.nrows_in_block :] for m in members]
    tails = [t for t in tails if t.size]
    off_rows = np.unique(np.concatenate(tails)) if tails else np.empty(0, np.int64)
    coupling = full[off_rows, c0:c1].tocsr() if off_rows.size else full[:0, c0:c1].tocsr()
    return InteriorBlock(block_id, int(c0), int(c1), members, off_rows, coupling)


def interior_block_multiply(A, block, R, C, G, transpose=False):
    """Module-level wrapper over :meth:`InteriorBlock.multiply`."""
    return block.multiply(A, R, C, G, transpose=transpose)


def interior_block_subrows(A, block, rows):
    """Dense sub-block L(rows, C_B), built transiently (see
    :meth:`InteriorBlock.factor_rows`)."""
    return block.factor_rows(A, rows)


def interior_source(block):
    """Update-source descriptor for a completed interior block."""
    return UpdateSource(
        "interior", rows=block.off_rows, order=block.c0, block=block
    )
