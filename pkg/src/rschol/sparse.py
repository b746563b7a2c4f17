"""Sparse symmetric storage, Matrix Market I/O, permutation and scatter/gather.

Matrices are stored as the lower triangle (diagonal included) in compressed
sparse column form with 0-based indices.  All index lists handled by the
scatter/gather helpers are strictly increasing integer arrays.
"""

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    MissingDiagonal,
    NonPositiveDiagonal,
    NotSubset,
    NotSymmetric,
    ParseError,
)

__all__ = [
    "SparseSpdMatrix",
    "Permutation",
    "read_matrix_market",
    "write_matrix_market",
    "permute_symmetric",
    "scatter_rows",
    "scatter_columns",
    "scatter",
    "gather_rows",
]


class SparseSpdMatrix:
    """Lower-triangle CSC storage of a symmetric positive definite matrix.

    Row indices are strictly increasing within each column and every
    diagonal entry is present and positive.  Instances are immutable after
    construction and safe to share between threads.
    """

    def __init__(self, n, col_ptr, row_idx, values):
        self.n = int(n)
        self.col_ptr = np.ascontiguousarray(col_ptr, dtype=np.int64)
        self.row_idx = np.ascontiguousarray(row_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._validate()
        for a in (self.col_ptr, self.row_idx, self.values):
            a.setflags(write=False)
        self._csr_full = None
        self._csc_lower = None

    def _validate(self):
        if self.col_ptr.shape != (self.n + 1,):
            raise DimensionMismatch("col_ptr must have length n+1")
        if np.any(np.diff(self.col_ptr) < 0):
            raise ParseError("col_ptr must be nondecreasing")
        if self.row_idx.shape[0] != self.values.shape[0]:
            raise DimensionMismatch("row_idx and values must have equal length")
        for j in range(self.n):
            lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
            rows = self.row_idx[lo:hi]
            if lo == hi or rows[0] != j:
                raise MissingDiagonal(f"diagonal entry ({j},{j}) missing")
            if np.any(np.diff(rows) <= 0):
                raise ParseError(f"row indices not strictly increasing in column {j}")
            if rows[-1] >= self.n:
                raise ParseError(f"row index out of range in column {j}")
            if self.values[lo] <= 0.0:
                raise NonPositiveDiagonal(f"a[{j},{j}] = {self.values[lo]} <= 0")

    @property
    def nnz_lower(self):
        return int(self.values.shape[0])

    def diagonal(self):
        return self.values[self.col_ptr[:-1]].copy()

    def to_csc_lower(self):
        """scipy CSC view of the stored lower triangle."""
        if self._csc_lower is None:
            self._csc_lower = sp.csc_matrix(
                (self.values, self.row_idx, self.col_ptr), shape=(self.n, self.n)
            )
        return self._csc_lower

    def to_csr_full(self):
        """scipy CSR of the full symmetric matrix (both triangles).

        Cached; used by the numeric kernels for block extraction and
        sparse matrix-vector products.
        """
        if self._csr_full is None:
            low = self.to_csc_lower()
            strict = sp.tril(low, -1)
            self._csr_full = (low + strict.T).tocsr()
            self._csr_full.sort_indices()
        return self._csr_full

    def dense(self):
        """Full symmetric matrix as a dense array (small problems only)."""
        return self.to_csr_full().toarray()

    def matvec(self, x):
        return self.to_csr_full() @ x

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build from (possibly unsorted, duplicated) lower-triangle triples.

        Entries above the diagonal are mirrored below; duplicates are summed.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        r = np.maximum(rows, cols)
        c = np.minimum(rows, cols)
        mat = sp.coo_matrix((vals, (r, c)), shape=(n, n)).tocsc()
        mat.sum_duplicates()
        mat.sort_indices()
        return cls(n, mat.indptr, mat.indices, mat.data)

    @classmethod
    def from_dense(cls, M):
        M = np.asarray(M, dtype=np.float64)
        n = M.shape[0]
        rows, cols = np.nonzero(np.tril(M))
        return cls.from_coo(n, rows, cols, M[rows, cols])

    def __repr__(self):
        return f"SparseSpdMatrix(n={self.n}, nnz_lower={self.nnz_lower})"


class Permutation:
    """Bijection on 0..n-1 with forward (old->new) and inverse maps."""

    def __init__(self, forward):
        self.forward = np.ascontiguousarray(forward, dtype=np.int64)
        n = self.forward.shape[0]
        inv = np.empty(n, dtype=np.int64)
        if n:
            inv[self.forward] = np.arange(n, dtype=np.int64)
        self.inverse = inv
        if n and (self.forward.min() < 0 or self.forward.max() >= n):
            raise DimensionMismatch("forward map is not a bijection on 0..n-1")
        if np.unique(self.forward).shape[0] != n:
            raise DimensionMismatch("forward map has repeated images")
        self.forward.setflags(write=False)
        self.inverse.setflags(write=False)

    @property
    def n(self):
        return self.forward.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n, dtype=np.int64))

    def compose(self, other):
        """Return the permutation applying ``self`` first, then ``other``."""
        return Permutation(other.forward[self.forward])

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(
            self.forward, other.forward
        )

    def __repr__(self):
        return f"Permutation(n={self.n})"


def permute_symmetric(A, perm):
    """Symmetric permutation B[p(i), p(j)] = A[i, j].

    Index pairs that land in the upper triangle are swapped back so the
    result keeps lower-triangle storage.
    """
    if perm.n != A.n:
        raise DimensionMismatch(f"permutation size {perm.n} != matrix size {A.n}")
    p = perm.forward
    cols = np.repeat(np.arange(A.n, dtype=np.int64), np.diff(A.col_ptr))
    new_r = p[A.row_idx]
    new_c = p[cols]
    r = np.maximum(new_r, new_c)
    c = np.minimum(new_r, new_c)
    order = np.lexsort((r, c))
    r, c, v = r[order], c[order], A.values[order]
    col_ptr = np.zeros(A.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(c, minlength=A.n), out=col_ptr[1:])
    return SparseSpdMatrix(A.n, col_ptr, r, v)


# ---------------------------------------------------------------------------
# scatter / gather calculus


def _positions(sub, full):
    """Positions of the sorted list ``sub`` inside the sorted list ``full``."""
    sub = np.asarray(sub, dtype=np.int64)
    full = np.asarray(full, dtype=np.int64)
    if sub.size and np.any(np.diff(sub) <= 0):
        raise NotSubset("index list is not strictly increasing")
    pos = np.searchsorted(full, sub)
    if np.any(pos >= full.size) or (sub.size and np.any(full[pos] != sub)):
        raise NotSubset("first index list is not a subset of the second")
    return pos


def scatter_rows(B, r1, r2):
    """Place the rows of B (indexed by r1) at the positions of r1 within r2.

    Returns a matrix with ``len(r2)`` rows; rows of r2 not in r1 are zero.
    """
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    pos = _positions(r1, r2)
    if B.shape[0] != pos.shape[0]:
        raise DimensionMismatch("B must have |r1| rows")
    out = np.zeros((len(r2), B.shape[1]))
    out[pos] = B
    return out


def gather_rows(C, r2, r1):
    """Extract the rows of C at the positions of r1 within r2.

    Inverse of :func:`scatter_rows`.
    """
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    pos = _positions(r1, r2)
    if C.shape[0] != len(r2):
        raise DimensionMismatch("C must have |r2| rows")
    return C[pos].copy()


def scatter_columns(B, c1, c2):
    """Column analogue of :func:`scatter_rows`."""
    return scatter_rows(np.asarray(B, dtype=np.float64).T, c1, c2).T


def scatter(B, r1, r2, c1, c2):
    """Scatter rows then columns."""
    return scatter_columns(scatter_rows(B, r1, r2), c1, c2)


# ---------------------------------------------------------------------------
# Matrix Market coordinate I/O

_HEADER_PREFIX = "%%matrixmarket"


def read_matrix_market(path):
    """Read a symmetric real coordinate Matrix Market file.

    The header must declare ``matrix coordinate real symmetric``.  Upper
    triangle entries are mirrored into the lower triangle and duplicates
    are summed.  Raises :class:`NotSymmetric` for a ``general`` (or any
    other non-symmetric) header, :class:`MissingDiagonal` or
    :class:`NonPositiveDiagonal` for bad diagonals, and
    :class:`ParseError` for anything malformed.
    """
    with open(path, "r", encoding="ascii") as f:
        header = f.readline()
        if not header.lower().startswith(_HEADER_PREFIX):
            raise ParseError("missing %%MatrixMarket header")
        words = header.split()
        if len(words) != 5:
            raise ParseError(f"malformed header: {header.strip()!r}")
        _, obj, fmt, field, symmetry = (w.lower() for w in words)
        if obj != "matrix" or fmt != "coordinate":
            raise ParseError("only coordinate matrices are supported")
        if field != "real":
            raise ParseError(f"unsupported field {field!r} (only real)")
        if symmetry != "symmetric":
            raise NotSymmetric(f"header declares {symmetry!r}, need symmetric")

        line = f.readline()
        while line and line.lstrip().startswith("%"):
            line = f.readline()
        try:
            m, n, nnz = (int(t) for t in line.split())
        except (ValueError, AttributeError) as exc:
            raise ParseError(f"bad size line: {line.strip()!r}") from exc
        if m != n:
            raise ParseError(f"matrix is {m}x{n}, must be square")

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in f:
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise ParseError(f"bad entry line: {s!r}")
            if k >= nnz:
                raise ParseError("more entries than declared")
            try:
                i, j = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError as exc:
                raise ParseError(f"bad entry line: {s!r}") from exc
            if not (1 <= i <= n and 1 <= j <= n):
                raise ParseError(f"entry ({i},{j}) out of range")
            rows[k], cols[k], vals[k] = i - 1, j - 1, v
            k += 1
        if k != nnz:
            raise ParseError(f"declared {nnz} entries, found {k}")

    try:
        return SparseSpdMatrix.from_coo(n, rows, cols, vals)
    except (MissingDiagonal, NonPositiveDiagonal):
        raise


def write_matrix_market(A, path):
    """Write the lower triangle in canonical coordinate form."""
    with open(path, "w", encoding="ascii") as f:
        f.write("%%MatrixMarket matrix coordinate real symmetric\n")
        f.write(f"{A.n} {A.n} {A.nnz_lower}\n")
        for j in range(A.n):
            for k in range(A.col_ptr[j], A.col_ptr[j + 1]):
                f.write(f"{A.row_idx[k] + 1} {j + 1} {A.values[k]:.17g}\n")
