"""Hierarchical compression of large diagonal blocks.

A big supernode's triangular diagonal factor is represented by a binary
block tree: the indices are split recursively (by the spatial partition
of the separator), each leaf keeps a dense lower triangle, and each
internal node keeps the subdiagonal block coupling its left-subtree
columns to its right-subtree rows, stored dense or as a low-rank pair.
Blocks are labeled by the in-order traversal index of the tree, which is
exactly the order in which they must be built.
"""

import numpy as np

from .blocks import LowRankBlock, eff_rows, raw_rows
from .errors import ShapeMismatch
from .kernels import dense_cholesky, gaussian_matrix, orthonormalize, tri_solve
from .ordering import SplitTree

__all__ = [
    "DiagBlockNode",
    "DiagBlockTree",
    "build_diag_tree",
    "diagonal_solve",
    "diagonal_multiply",
    "factor_diagonal",
    "approximate_diagonal_block",
]


class DiagBlockNode:
    """Tree node; ``lo:hi`` is the local column span of its subtree.

    For an internal node, ``split`` divides the span into the left
    subtree ``lo:split`` (the block's columns) and the right subtree
    ``split:hi`` (the block's rows).
    """

    __slots__ = ("s", "lo", "hi", "split", "left", "right", "parent")

    def __init__(self, s, lo, hi, split=None, left=None, right=None):
        self.s = s
        self.lo = lo
        self.hi = hi
        self.split = split
        self.left = left
        self.right = right
        self.parent = None

    @property
    def is_leaf(self):
        return self.split is None


class DiagBlockTree:
    """In-order-indexed block tree for one supernode's diagonal factor.

    ``nodes[s]`` maps the 1-based in-order index to its node and
    ``blocks[s]`` to its numeric content once built: a dense lower
    triangle at leaves, a :class:`LowRankBlock` or dense coupling block
    at internal nodes.  ``g0`` is the supernode's first global column.
    """

    def __init__(self, ncols, g0=0):
        self.ncols = ncols
        self.g0 = g0
        self.nodes = {}
        self.root = None
        self.blocks = {}

    @property
    def block_count(self):
        return len(self.nodes)

    def node(self, s):
        return self.nodes[s]

    def inorder_ids(self):
        return sorted(self.nodes)

    def leaf_ids(self):
        return [s for s in self.inorder_ids() if self.nodes[s].is_leaf]

    def path_above(self, s):
        """Ancestors of s with a smaller in-order index (the blocks to the
        lower left whose content feeds block s)."""
        node = self.nodes[s].parent
        out = []
        while node is not None:
            if node.s < s:
                out.append(node.s)
            node = node.parent
        return out

    def col_span(self, s):
        """(local rows, local cols) spans of block s: a leaf occupies its
        own square; an internal block couples left cols to right rows."""
        node = self.nodes[s]
        if node.is_leaf:
            return (node.lo, node.hi), (node.lo, node.hi)
        return (node.split, node.hi), (node.lo, node.split)

    def assemble_dense(self):
        """Explicit lower triangle (testing / small supernodes)."""
        L = np.zeros((self.ncols, self.ncols))
        for s, node in self.nodes.items():
            content = self.blocks[s]
            (r0, r1), (c0, c1) = self.col_span(s)
            if node.is_leaf:
                L[r0:r1, c0:c1] = np.tril(content)
            elif isinstance(content, LowRankBlock):
                L[r0:r1, c0:c1] = content.dense()
            else:
                L[r0:r1, c0:c1] = content
        return L

    def stored_scalars(self):
        total = 0
        for s, node in self.nodes.items():
            content = self.blocks.get(s)
            if content is None:
                continue
            if node.is_leaf:
                k = node.hi - node.lo
                total += k * (k + 1) // 2
            elif isinstance(content, LowRankBlock):
                total += content.scalars()
            else:
                total += content.size
        return total


def build_diag_tree(ncols, tau_d, split=None, g0=0):
    """Skeleton tree for a diagonal block of ``ncols`` columns.

    ``split`` is the :class:`SplitTree` produced by the spatial
    partitioning of the separator; without one the natural ceil-halving
    split is used (callers fall back to it, with a warning, when no
    coordinates are available).
    """
    if split is None:
        split = SplitTree.natural(ncols, tau_d)
    if split.size != ncols:
        raise ShapeMismatch("split tree does not cover the column count")
    tree = DiagBlockTree(ncols, g0=g0)
    counter = [0]

    def rec(piece, lo):
        if piece.is_leaf:
            counter[0] += 1
            node = DiagBlockNode(counter[0], lo, lo + piece.size)
            tree.nodes[node.s] = node
            return node
        left = rec(piece.left, lo)
        counter[0] += 1
        node = DiagBlockNode(counter[0], lo, lo + piece.size, split=lo + piece.left.size)
        tree.nodes[node.s] = node
        right = rec(piece.right, lo + piece.left.size)
        node.left, node.right = left, right
        left.parent = right.parent = node
        return node

    tree.root = rec(split, 0)
    return tree


# ---------------------------------------------------------------------------
# solves


def _couple_apply(content, X, transpose):
    if isinstance(content, LowRankBlock):
        return content.rmatmat(X) if transpose else content.matmat(X)
    return content.T @ X if transpose else content @ X


def _tree_solve(tree, G, transpose, node):
    if node.is_leaf:
        return tri_solve(tree.blocks[node.s], G, transpose=transpose)
    nleft = node.split - node.lo
    G1, G2 = G[:nleft], G[nleft:]
    content = tree.blocks[node.s]
    if transpose:
        # backward substitution: right part first, coupling is above it
        X2 = _tree_solve(tree, G2, transpose, node.right)
        X1 = _tree_solve(tree, G1 - _couple_apply(content, X2, True), transpose, node.left)
    else:
        X1 = _tree_solve(tree, G1, transpose, node.left)
        X2 = _tree_solve(tree, G2 - _couple_apply(content, X1, False), transpose, node.right)
    return np.concatenate([X1, X2], axis=0)


def diagonal_solve(L, j, G, transpose=False, s=None):
    """Apply the inverse (or inverse transpose) of supernode j's diagonal
    factor, or of the sub-triangle rooted at block ``s``.

    Works for dense and tree-structured diagonals; the recursion is plain
    forward/backward block substitution with the stored couplings.
    """
    node = L.nodes[j]
    diag = node.diag
    G = np.asarray(G, dtype=np.float64)
    vec = G.ndim == 1
    X = G.reshape(-1, 1) if vec else G
    if isinstance(diag, DiagBlockTree):
        root = diag.root if s is None else diag.nodes[s]
        if X.shape[0] != root.hi - root.lo:
            raise ShapeMismatch("operand does not match the subtree span")
        out = _tree_solve(diag, X, transpose, root)
    else:
        if s is not None and s != 1:
            raise ShapeMismatch("dense diagonal has a single block")
        out = tri_solve(diag, X, transpose=transpose)
    return out[:, 0] if vec else out


# ---------------------------------------------------------------------------
# implicit products and leaf factorization


def _source_window_update_dense(U, src, rw, cw, A=None):
    """Subtract src's Schur contribution restricted to the global windows
    rows ``rw=[r0,r1)``, cols ``cw=[c0,c1)`` from the dense block U."""
    r0, r1 = rw
    c0, c1 = cw
    if src.kind == "interior":
        Yc = src.block.factor_rows(A, np.arange(c0, c1))
        Yr = Yc if (r0, r1) == (c0, c1) else src.block.factor_rows(A, np.arange(r0, r1))
        U -= Yr @ Yc.T
        return
    rows = src.rows
    clo, chi = np.searchsorted(rows, (c0, c1))
    rlo, rhi = np.searchsorted(rows, (r0, r1))
    if clo == chi or rlo == rhi:
        return
    off = src.node.offdiag
    P = eff_rows(off, slice(rlo, rhi))
    Q = raw_rows(off, slice(clo, chi))
    U[np.ix_(rows[rlo:rhi] - r0, rows[clo:chi] - c0)] -= P @ Q.T


def _source_window_multiply(W, src, rw, cw, G, transpose, A=None):
    """W -= (window of src's Schur contribution) @ G (or its transpose)."""
    r0, r1 = rw
    c0, c1 = cw
    if src.kind == "interior":
        if transpose:
            W -= src.block.multiply(A, np.arange(c0, c1), np.arange(r0, r1), G)
        else:
            W -= src.block.multiply(A, np.arange(r0, r1), np.arange(c0, c1), G)
        return
    rows = src.rows
    clo, chi = np.searchsorted(rows, (c0, c1))
    rlo, rhi = np.searchsorted(rows, (r0, r1))
    if clo == chi or rlo == rhi:
        return
    off = src.node.offdiag
    if transpose:
        T = eff_rows(off, slice(rlo, rhi)).T @ G[rows[rlo:rhi] - r0]
        W[rows[clo:chi] - c0] -= raw_rows(off, slice(clo, chi)) @ T
    else:
        T = raw_rows(off, slice(clo, chi)).T @ G[rows[clo:chi] - c0]
        W[rows[rlo:rhi] - r0] -= eff_rows(off, slice(rlo, rhi)) @ T


def _path_pair(tree, p, rspan, cspan):
    """Effective factor rows of ancestor block p aligned to the given
    local row/col spans (both lie inside p's row span)."""
    node = tree.nodes[p]
    base = node.split
    content = tree.blocks[p]
    P = eff_rows(content, slice(rspan[0] - base, rspan[1] - base))
    Q = raw_rows(content, slice(cspan[0] - base, cspan[1] - base))
    return P, Q


def factor_diagonal(A, L, j, s, sources=None):
    """Assemble and factor dense leaf block ``s`` of supernode j's tree.

    The leaf Schur complement collects the matrix block, contributions
    from all of j's descendants restricted to the leaf's global span, and
    contributions from earlier blocks on the leaf's root path.  Raises
    :class:`IndefiniteError` (handled by the restart policy).
    """
    from .factor import collect_sources  # deferred, avoids import cycle

    node = L.nodes[j]
    tree = node.diag
    leaf = tree.nodes[s]
    if not leaf.is_leaf:
        raise ShapeMismatch(f"block {s} is not a leaf")
    if sources is None:
        sources = collect_sources(L, j)
    g0, g1 = tree.g0 + leaf.lo, tree.g0 + leaf.hi
    U = A.to_csr_full()[g0:g1, g0:g1].toarray()
    for src in sources:
        _source_window_update_dense(U, src, (g0, g1), (g0, g1), A=A)
    for p in tree.path_above(s):
        P, Q = _path_pair(tree, p, (leaf.lo, leaf.hi), (leaf.lo, leaf.hi))
        U -= P @ Q.T
    return dense_cholesky(U)


def diagonal_multiply(A, L, j, s, G, transpose=False, sources=None):
    """Product of internal block ``s`` of supernode j's tree with G,
    without forming the block.

    The block is the Schur coupling of the left-subtree columns to the
    right-subtree rows: the left sub-triangle's inverse transpose is
    applied to G, then the matrix block and all descendant and earlier
    root-path contributions act on the solved operand (transposed
    variant mirrors the steps and solves last).
    """
    from .factor import collect_sources

    node = L.nodes[j]
    tree = node.diag
    blk = tree.nodes[s]
    if blk.is_leaf:
        raise ShapeMismatch(f"block {s} is a leaf, not a coupling block")
    if sources is None:
        sources = collect_sources(L, j)
    (r0, r1), (c0, c1) = tree.col_span(s)
    gr = (tree.g0 + r0, tree.g0 + r1)
    gc = (tree.g0 + c0, tree.g0 + c1)
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    full = A.to_csr_full()
    if not transpose:
        if G.shape[0] != c1 - c0:
            raise ShapeMismatch("G must have as many rows as the block has columns")
        G1 = diagonal_solve(L, j, G, transpose=True, s=blk.left.s)
        W = full[gr[0] : gr[1], gc[0] : gc[1]] @ G1
        for src in sources:
            _source_window_multiply(W, src, gr, gc, G1, False, A=A)
        for p in tree.path_above(s):
            P, Q = _path_pair(tree, p, (r0, r1), (c0, c1))
            W -= P @ (Q.T @ G1)
        return W
    if G.shape[0] != r1 - r0:
        raise ShapeMismatch("G must have as many rows as the block has rows")
    W = full[gr[0] : gr[1], gc[0] : gc[1]].T @ G
    for src in sources:
        _source_window_multiply(W, src, gr, gc, G, True, A=A)
    for p in tree.path_above(s):
        P, Q = _path_pair(tree, p, (r0, r1), (c0, c1))
        W -= Q @ (P.T @ G)
    return diagonal_solve(L, j, W, transpose=False, s=blk.left.s)


def approximate_diagonal_block(A, L, j, s, rank, power_iters=1, seed=0, sources=None):
    """Randomized low-rank approximation of internal tree block ``s``.

    Same recipe as the off-diagonal compression, driven by the implicit
    block products above; U is orthonormal and V its projection, so the
    stored pair is the orthogonal projection of the true coupling block.
    """
    from .factor import collect_sources

    if sources is None:
        sources = collect_sources(L, j)
    tree = L.nodes[j].diag
    (r0, r1), (c0, c1) = tree.col_span(s)
    rank = min(rank, r1 - r0, c1 - c0)
    G = gaussian_matrix(r1 - r0, rank, seed)
    G = diagonal_multiply(A, L, j, s, G, transpose=True, sources=sources)
    for _ in range(power_iters):
        G = diagonal_multiply(A, L, j, s, G, transpose=False, sources=sources)
        G = diagonal_multiply(A, L, j, s, G, transpose=True, sources=sources)
    U = orthonormalize(G)
    V = diagonal_multiply(A, L, j, s, U, transpose=False, sources=sources)
    return LowRankBlock(V, U)
