"""Factor block containers shared by the numeric modules."""

import numpy as np

__all__ = ["LowRankBlock", "SupernodeFactor", "UpdateSource", "eff_rows", "raw_rows"]


class LowRankBlock:
    """Low-rank factor block B ~ V @ U.T with U orthonormal.

    V is the projection of the true block onto span(U), so replacing the
    block by V U^T only ever removes positive semidefinite mass from the
    downstream Schur complements.
    """

    __slots__ = ("V", "U", "_utu")

    def __init__(self, V, U):
        self.V = np.ascontiguousarray(V, dtype=np.float64)
        self.U = np.ascontiguousarray(U, dtype=np.float64)
        self._utu = None

    @property
    def rank(self):
        return self.U.shape[1]

    @property
    def utu(self):
        """U.T @ U, cached.  Identity up to roundoff for orthonormal U,
        kept explicit so the update formulas stay exact for any U."""
        if self._utu is None:
            self._utu = self.U.T @ self.U
        return self._utu

    def matmat(self, X):
        return self.V @ (self.U.T @ X)

    def rmatmat(self, X):
        return self.U @ (self.V.T @ X)

    def dense(self):
        return self.V @ self.U.T

    def scalars(self):
        return self.V.size + self.U.size


class SupernodeFactor:
    """Numeric content of one supernode.

    ``diag`` is a dense lower triangle or a hierarchical block tree;
    ``offdiag`` is a dense |R_j| x |C_j| block, a :class:`LowRankBlock`,
    or None (empty structure, or implicit because the supernode belongs
    to an interior block, in which case ``offdiag`` holds only the rows
    inside the block, ``rows[:nrows_in_block]``).
    """

    __slots__ = ("j", "c0", "c1", "rows", "diag", "offdiag", "nrows_in_block", "interior_id")

    def __init__(self, j, c0, c1, rows, diag=None, offdiag=None, nrows_in_block=None, interior_id=-1):
        self.j = j
        self.c0 = c0
        self.c1 = c1
        self.rows = rows
        self.diag = diag
        self.offdiag = offdiag
        self.nrows_in_block = nrows_in_block
        self.interior_id = interior_id

    @property
    def ncols(self):
        return self.c1 - self.c0

    @property
    def source_rows(self):
        """Rows this node can serve as an update source for (truncated to
        the owning interior block for member nodes)."""
        if self.nrows_in_block is None:
            return self.rows
        return self.rows[: self.nrows_in_block]


class UpdateSource:
    """One contributor to later Schur complements.

    Either a factored supernode (explicit dense or low-rank off-diagonal
    rows) or a whole interior block whose coupling rows stay implicit.
    ``rows`` is the sorted global row set the source can still update;
    ``ptr`` is engine bookkeeping for the left-looking sweep.
    """

    __slots__ = ("kind", "node", "block", "rows", "order", "ptr")

    def __init__(self, kind, rows, order, node=None, block=None):
        self.kind = kind
        self.rows = rows
        self.order = order
        self.node = node
        self.block = block
        self.ptr = 0


def eff_rows(offdiag, sel):
    """Rows ``sel`` of the effective left factor of an update product.

    For an update  L(rsel,:) @ L(csel,:).T  the pair
    (eff_rows(rsel), raw_rows(csel)) multiplies out to the correct block
    for both dense and low-rank content (the low-rank case carries the
    U^T U Gram factor on the left).
    """
    if isinstance(offdiag, LowRankBlock):
        return offdiag.V[sel] @ offdiag.utu
    return offdiag[sel]


def raw_rows(offdiag, sel):
    if isinstance(offdiag, LowRankBlock):
        return offdiag.V[sel]
    return offdiag[sel]
