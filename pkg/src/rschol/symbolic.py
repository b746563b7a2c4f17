"""Elimination tree, supernode formation and structure analysis.

Operates on the already permuted matrix.  Separators from the dissection
tree that have at least ``tau_o`` vertices become supernodes of their own;
the remaining columns are grouped into fundamental supernodes and then
relaxed by CHOLMOD-style amalgamation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "EliminationTree",
    "build_etree",
    "postorder",
    "col_counts",
    "SupernodePartition",
    "form_supernodes",
    "compute_row_structures",
    "DescendantMap",
    "descendants",
]

# relaxed amalgamation, CHOLMOD's tiered defaults: tiny supernodes merge
# unconditionally, larger ones only while the cumulative fraction of
# stored explicit zeros stays below the tier's bound
AMALG_TIERS = ((4, 1.0), (16, 0.8), (48, 0.1), (None, 0.05))


@dataclass
class EliminationTree:
    """Per-column parent pointers (-1 for roots)."""

    parent: np.ndarray

    @property
    def n(self):
        return self.parent.shape[0]


def build_etree(A):
    """Column elimination tree via the classic union-find row sweep."""
    import scipy.sparse as sp

    n = A.n
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    # row i of the strict lower triangle: the columns j < i adjacent to i
    low = sp.tril(A.to_csc_lower(), -1).tocsr()
    indptr, indices = low.indptr, low.indices
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            j = int(indices[p])
            # walk from j to its current root, compressing paths onto i
            while True:
                a = int(ancestor[j])
                ancestor[j] = i
                if a == -1:
                    parent[j] = i
                    break
                if a == i:
                    break
                j = a
    return EliminationTree(parent)


def postorder(parent):
    """Postorder of a forest given parent pointers (children by index)."""
    n = parent.shape[0]
    head = np.full(n, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for j in range(n - 1, -1, -1):  # children end up in ascending order
        p = parent[j]
        if p != -1:
            nxt[j] = head[p]
            head[p] = j
    post = np.empty(n, dtype=np.int64)
    k = 0
    stack = []
    for root in range(n):
        if parent[root] != -1:
            continue
        stack.append(root)
        while stack:
            node = stack[-1]
            child = head[node]
            if child != -1:
                head[node] = nxt[child]
                stack.append(child)
            else:
                post[k] = node
                k += 1
                stack.pop()
    return post


def col_counts(A, etree, post=None):
    """Per-column nonzero counts of the Cholesky factor (diagonal included).

    Skeleton/least-common-ancestor counting; O(nnz(A) * alpha(n)).
    """
    n = A.n
    parent = etree.parent
    if post is None:
        post = postorder(parent)
    first = np.full(n, -1, dtype=np.int64)
    delta = np.zeros(n, dtype=np.int64)
    for k in range(n):
        j = int(post[k])
        delta[j] = 1 if first[j] == -1 else 0
        while j != -1 and first[j] == -1:
            first[j] = k
            j = int(parent[j])
    maxfirst = np.full(n, -1, dtype=np.int64)
    prevleaf = np.full(n, -1, dtype=np.int64)
    ancestor = np.arange(n, dtype=np.int64)
    col_ptr, row_idx = A.col_ptr, A.row_idx
    for k in range(n):
        j = int(post[k])
        if parent[j] != -1:
            delta[parent[j]] -= 1
        for p in range(col_ptr[j], col_ptr[j + 1]):
            i = int(row_idx[p])
            if i <= j or first[j] <= maxfirst[i]:
                continue  # j is not a new leaf of i's row subtree
            maxfirst[i] = first[j]
            jprev = prevleaf[i]
            prevleaf[i] = j
            if jprev == -1:
                delta[j] += 1
            else:
                q = int(jprev)
                while q != ancestor[q]:
                    q = int(ancestor[q])
                delta[j] += 1
                delta[q] -= 1
                s = int(jprev)
                while s != q:
                    snext = int(ancestor[s])
                    ancestor[s] = q
                    s = snext
        if parent[j] != -1:
            ancestor[j] = parent[j]
    counts = delta.copy()
    for j in range(n):
        if parent[j] != -1:
            counts[parent[j]] += counts[j]
    return counts


@dataclass
class SupernodePartition:
    """Contiguous column partition with per-supernode structure.

    ``starts`` has length M+1; supernode j owns columns
    ``starts[j]:starts[j+1]``.  ``rows[j]`` (filled by
    :func:`compute_row_structures`) lists the below-diagonal structure,
    sorted ascending.  Separator supernodes carry ``is_separator[j]`` and
    optionally an owning interior block id in ``interior_id`` (-1 none).
    """

    n: int
    starts: np.ndarray
    is_separator: np.ndarray
    rows: list = field(default_factory=list)
    interior_id: np.ndarray = None

    def __post_init__(self):
        if self.interior_id is None:
            self.interior_id = np.full(self.count, -1, dtype=np.int64)

    @property
    def count(self):
        return self.starts.shape[0] - 1

    def cols(self, j):
        return int(self.starts[j]), int(self.starts[j + 1])

    def ncols(self, j):
        return int(self.starts[j + 1] - self.starts[j])

    def supernode_of(self, col):
        return int(np.searchsorted(self.starts, col, side="right") - 1)


def _fundamental_ranges(lo, hi, parent, counts):
    """Fundamental supernode boundaries within the column range [lo, hi)."""
    bounds = [lo]
    for j in range(lo + 1, hi):
        if parent[j - 1] != j or counts[j - 1] != counts[j] + 1:
            bounds.append(j)
    bounds.append(hi)
    return bounds


def _amalgamate(bounds, parent, counts):
    """Greedy parent/child merging of adjacent supernodes.

    Merging supernode s into the following supernode t is structurally
    safe when the parent of s's last column is t's first column: the
    union structure is then t's structure.  The merge is accepted while
    the cumulative fraction of stored explicit zeros stays within the
    CHOLMOD tier for the merged width.
    """
    ncols = [bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1)]
    nrows = [int(counts[bounds[i]]) - ncols[i] for i in range(len(bounds) - 1)]
    zeros = [0] * len(ncols)
    starts = list(bounds[:-1])
    i = 0
    while i < len(starts) - 1:
        last_col = starts[i] + ncols[i] - 1
        if parent[last_col] != starts[i + 1]:
            i += 1
            continue
        ns, nt = ncols[i], ncols[i + 1]
        rs, rt = nrows[i], nrows[i + 1]
        merged_cols = ns + nt
        # s's structure beyond t's columns is a subset of t's rows, so the
        # merged trapezoid has t's rows; everything s did not already
        # store in its own trapezoid becomes explicit zeros
        new_zeros = ns * (nt + rt - rs)
        tot_zeros = zeros[i] + zeros[i + 1] + new_zeros
        size = merged_cols * (merged_cols + 1) // 2 + merged_cols * rt
        frac = tot_zeros / size
        ok = False
        for width, bound in AMALG_TIERS:
            if width is None or merged_cols <= width:
                ok = frac < bound or bound >= 1.0
                break
        if ok:
            ncols[i] = merged_cols
            nrows[i] = rt
            zeros[i] = tot_zeros
            del starts[i + 1], ncols[i + 1], nrows[i + 1], zeros[i + 1]
            # retry the grown supernode against its new neighbor
        else:
            i += 1
    return starts


def form_supernodes(A, etree, septree, tau_o, relax=True):
    """Partition columns into supernodes.

    Every dissection separator with at least ``tau_o`` vertices becomes
    exactly one supernode, flagged as a separator node (these are never
    amalgamated).  The remaining columns are grouped into fundamental
    supernodes; with ``relax`` they are additionally merged by the
    CHOLMOD-style heuristic, which may introduce padding zeros.
    """
    n = A.n
    parent = etree.parent
    counts = col_counts(A, etree)
    sep_ranges = sorted(
        (node.lo, node.hi) for node in septree.separators(min_size=max(tau_o, 1))
    )
    starts = []
    flags = []
    pos = 0
    for lo, hi in sep_ranges + [(n, n)]:
        if pos < lo:
            bounds = _fundamental_ranges(pos, lo, parent, counts)
            gap = _amalgamate(bounds, parent, counts) if relax else bounds[:-1]
            starts.extend(gap)
            flags.extend([False] * len(gap))
        if hi > lo:
            starts.append(lo)
            flags.append(True)
        pos = hi
    starts.append(n)
    return SupernodePartition(
        n,
        np.asarray(starts, dtype=np.int64),
        np.asarray(flags, dtype=bool),
    )


def compute_row_structures(A, partition):
    """Fill ``partition.rows`` with each supernode's below-diagonal structure.

    R_j is the union of A's below-block rows over the supernode's columns
    and of the structures passed up along the supernodal elimination tree
    (a child contributes everything beyond its parent's columns).
    """
    if partition.n != A.n:
        raise DimensionMismatch("partition does not match matrix size")
    M = partition.count
    col_ptr, row_idx = A.col_ptr, A.row_idx
    pending = [[] for _ in range(M)]
    rows = [None] * M
    for j in range(M):
        c0, c1 = partition.cols(j)
        pieces = pending[j]
        a_rows = row_idx[col_ptr[c0] : col_ptr[c1]]
        pieces.append(a_rows[a_rows >= c1])
        merged = np.unique(np.concatenate(pieces)) if pieces else np.empty(0, np.int64)
        rows[j] = merged
        pending[j] = None
        if merged.size:
            t = partition.supernode_of(int(merged[0]))
            t1 = partition.starts[t + 1]
            pending[t].append(merged[np.searchsorted(merged, t1) :])
    partition.rows = rows
    return rows


@dataclass
class DescendantMap:
    """Index lists relating descendant k's off-diagonal rows to supernode j.

    ``pos_diag``/``pos_off`` are positions into R_k selecting the rows that
    fall in C_j and R_j respectively; ``rows_diag``/``rows_off`` are the
    corresponding global indices; ``cols_in_j`` are the positions of
    ``rows_diag`` within C_j and ``offpos_in_j`` those of ``rows_off``
    within R_j.
    """

    k: int
    pos_diag: np.ndarray
    pos_off: np.ndarray
    rows_diag: np.ndarray
    rows_off: np.ndarray
    cols_in_j: np.ndarray
    offpos_in_j: np.ndarray


def descendants(partition, j):
    """Supernodes k < j whose off-diagonal rows intersect C_j, with maps.

    Returned in ascending k.  Requires row structures to be present.
    """
    c0, c1 = partition.cols(j)
    R_j = partition.rows[j]
    out = []
    for k in range(j):
        rk = partition.rows[k]
        lo = np.searchsorted(rk, c0)
        hi = np.searchsorted(rk, c1)
        if lo == hi:
            continue
        rows_diag = rk[lo:hi]
        rows_off = rk[hi:]
        out.append(
            DescendantMap(
                k=k,
                pos_diag=np.arange(lo, hi, dtype=np.int64),
                pos_off=np.arange(hi, rk.shape[0], dtype=np.int64),
                rows_diag=rows_diag,
                rows_off=rows_off,
                cols_in_j=rows_diag - c0,
                offpos_in_j=np.searchsorted(R_j, rows_off),
            )
        )
    return out
