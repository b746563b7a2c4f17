"""Left-looking supernodal factorization with rank-structured compression.

The factorization sweeps supernodes left to right.  Ordinary supernodes
(grouped into interior blocks when enabled) are factored exactly; each
large-separator supernode gets a randomized low-rank approximation of its
off-diagonal block and, when big enough, a hierarchical representation of
its diagonal block.  Compressed off-diagonals use the projection form
V = L_off @ U with U orthonormal, which keeps every later Schur
complement positive definite; diagonal compression has no such guarantee,
so any indefinite pivot triggers a restart with a larger diagonal rank
constant.

The result applies as a symmetric positive definite preconditioner.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagblocks
from .blocks import LowRankBlock, SupernodeFactor, UpdateSource, eff_rows, raw_rows
from .errors import (
    DimensionMismatch,
    IndefiniteError,
    MissingCoordinates,
    ShapeMismatch,
    TooManyRestarts,
)
from .interior import factor_interior_block
from .kernels import dense_cholesky, gaussian_matrix, orthonormalize, tri_solve
from .ordering import (
    DEFAULT_LEAF_SIZE,
    IndexCoordinates,
    SplitTree,
    nested_dissection,
    partition_separator,
    spectral_coordinates,
)
from .sparse import Permutation, permute_symmetric
from .symbolic import build_etree, compute_row_structures, form_supernodes

__all__ = [
    "SolverConfig",
    "FactorStats",
    "RankStructuredFactor",
    "block_rank",
    "factor_supernode",
    "off_diagonal_multiply",
    "off_diagonal_multiply_trans",
    "approximate_off_diagonal",
    "collect_sources",
    "factorize",
]

# a compressed block must be meaningfully thinner than the block itself,
# otherwise the dense representation is kept
DENSE_FALLBACK_FRACTION = 0.75
# hierarchical diagonal storage kicks in above the dense leaf size
DIAG_TREE_FACTOR = 1


@dataclass
class SolverConfig:
    """Tuning knobs for :func:`factorize`.

    ``tau_o``: separators at least this large become compressed supernodes.
    ``tau_d``: dense leaf size of hierarchical diagonal blocks.
    ``alpha_o`` / ``alpha_d``: rank-scale constants for off-diagonal and
    diagonal compression (``alpha_d`` is the initial value; it grows by
    ``alpha_d_growth`` on every indefiniteness restart).
    ``oversample``: extra columns added to every rank request.
    ``power_iters``: power iterations in the randomized range finder.
    """

    tau_o: float = 400
    tau_d: int = 256
    alpha_o: float = 1.0
    alpha_d: float = 0.5
    oversample: int = 8
    power_iters: int = 1
    seed: int = 0
    interior_blocks: bool = True
    max_restarts: int = 10
    alpha_d_growth: float = 1.25

    def __post_init__(self):
        if self.tau_o < 1 or self.tau_d < 1:
            raise ValueError("tau_o and tau_d must be positive")
        if self.alpha_o <= 0 or self.alpha_d <= 0 or self.oversample <= 0:
            raise ValueError("alpha_o, alpha_d and oversample must be positive")
        if self.power_iters < 0 or self.max_restarts < 0:
            raise ValueError("power_iters and max_restarts must be nonnegative")
        if self.alpha_d_growth <= 1.0:
            raise ValueError("alpha_d_growth must exceed 1")

    def to_dict(self):
        return {
            "tau_o": self.tau_o if math.isfinite(self.tau_o) else "inf",
            "tau_d": self.tau_d,
            "alpha_o": self.alpha_o,
            "alpha_d": self.alpha_d,
            "oversample": self.oversample,
            "power_iters": self.power_iters,
            "seed": self.seed,
            "interior_blocks": self.interior_blocks,
            "max_restarts": self.max_restarts,
            "alpha_d_growth": self.alpha_d_growth,
        }


@dataclass
class FactorStats:
    n: int = 0
    nnz_lower: int = 0
    supernodes: int = 0
    separator_supernodes: int = 0
    interior_block_count: int = 0
    compressed_offdiag: int = 0
    compressed_diag: int = 0
    dense_fallback: int = 0
    stored_scalars: int = 0
    restarts: int = 0
    alpha_d_final: float = 0.0
    alpha_d_history: list = field(default_factory=list)
    phase_times: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def compressed_blocks(self):
        return self.compressed_offdiag + self.compressed_diag

    def to_dict(self):
        return {
            "n": self.n,
            "nnz": self.nnz_lower,
            "supernodes": self.supernodes,
            "separator_supernodes": self.separator_supernodes,
            "interior_blocks": self.interior_block_count,
            "compressed_blocks": self.compressed_blocks,
            "compressed_offdiag": self.compressed_offdiag,
            "compressed_diag": self.compressed_diag,
            "dense_fallback": self.dense_fallback,
            "stored_scalars": self.stored_scalars,
            "restarts": self.restarts,
            "alpha_D_final": self.alpha_d_final,
            "alpha_D_history": self.alpha_d_history,
            "phase_times": self.phase_times,
            "seed": self.seed,
        }


class RankStructuredFactor:
    """Approximate Cholesky factor, applied as an SPD preconditioner.

    Holds the composed permutation, the supernode partition, one factor
    record per supernode, and the interior blocks.  Immutable once
    :func:`factorize` returns; concurrent solves are safe.
    """

    def __init__(self, n, perm, partition, config):
        self.n = n
        self.perm = perm
        self.partition = partition
        self.config = config
        self.nodes = [None] * partition.count
        self.interior = []
        self.units = []
        self.stats = FactorStats(n=n, seed=config.seed)

    # -- application ------------------------------------------------------

    def apply(self, r):
        """z = P^T (L L^T)^{-1} P r, the preconditioner action."""
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise DimensionMismatch(f"expected vector of length {self.n}")
        y = r[self.perm.inverse].copy()
        self._forward(y)
        self._backward(y)
        return y[self.perm.forward]

    __call__ = apply

    def _forward(self, y):
        for kind, obj in self.units:
            if kind == "interior":
                w = obj.solve(y[obj.c0 : obj.c1], transpose=False)
                y[obj.c0 : obj.c1] = w
                if obj.off_rows.size:
                    t = obj.solve(w, transpose=True)
                    y[obj.off_rows] -= obj.coupling @ t
            else:
                w = diagblocks.diagonal_solve(self, obj.j, y[obj.c0 : obj.c1])
                y[obj.c0 : obj.c1] = w
                if obj.rows.size and obj.offdiag is not None:
                    if isinstance(obj.offdiag, LowRankBlock):
                        y[obj.rows] -= obj.offdiag.matmat(w)
                    else:
                        y[obj.rows] -= obj.offdiag @ w

    def _backward(self, z):
        for kind, obj in reversed(self.units):
            if kind == "interior":
                rhs = z[obj.c0 : obj.c1]
                if obj.off_rows.size:
                    rhs = rhs - obj.solve(obj.coupling.T @ z[obj.off_rows], transpose=False)
                z[obj.c0 : obj.c1] = obj.solve(rhs, transpose=True)
            else:
                rhs = z[obj.c0 : obj.c1]
                if obj.rows.size and obj.offdiag is not None:
                    if isinstance(obj.offdiag, LowRankBlock):
                        rhs = rhs - obj.offdiag.rmatmat(z[obj.rows])
                    else:
                        rhs = rhs - obj.offdiag.T @ z[obj.rows]
                z[obj.c0 : obj.c1] = diagblocks.diagonal_solve(self, obj.j, rhs, transpose=True)

    # -- inspection -------------------------------------------------------

    def stored_scalars(self):
        """Number of numeric scalars held by the factor (couplings kept
        for implicit interior rows included)."""
        total = 0
        for kind, obj in self.units:
            if kind == "interior":
                total += obj.stored_scalars()
            else:
                nc = obj.ncols
                if isinstance(obj.diag, diagblocks.DiagBlockTree):
                    total += obj.diag.stored_scalars()
                else:
                    total += nc * (nc + 1) // 2
                if obj.offdiag is None:
                    pass
                elif isinstance(obj.offdiag, LowRankBlock):
                    total += obj.offdiag.scalars()
                else:
                    total += obj.offdiag.size
        return total

    def dense_lower(self):
        """Explicit lower-triangular factor (small problems, testing)."""
        L = np.zeros((self.n, self.n))
        for kind, obj in self.units:
            if kind == "interior":
                for m in obj.members:
                    L[m.c0 : m.c1, m.c0 : m.c1] = np.tril(m.diag)
                    if m.nrows_in_block:
                        L[m.rows[: m.nrows_in_block], m.c0 : m.c1] = m.offdiag
                if obj.off_rows.size:
                    X = obj.solve(obj.coupling.T.toarray(), transpose=False).T
                    L[obj.off_rows, obj.c0 : obj.c1] = X
            else:
                if isinstance(obj.diag, diagblocks.DiagBlockTree):
                    L[obj.c0 : obj.c1, obj.c0 : obj.c1] = obj.diag.assemble_dense()
                else:
                    L[obj.c0 : obj.c1, obj.c0 : obj.c1] = np.tril(obj.diag)
                if obj.rows.size and obj.offdiag is not None:
                    blockrows = (
                        obj.offdiag.dense()
                        if isinstance(obj.offdiag, LowRankBlock)
                        else obj.offdiag
                    )
                    L[obj.rows, obj.c0 : obj.c1] = blockrows
        return L

    def to_scipy_lower(self):
        """Sparse explicit lower factor (expands any compressed blocks)."""
        import scipy.sparse as sp

        rows, cols, vals = [], [], []

        def put(block, rr, cc):
            b = np.asarray(block)
            r, c = np.nonzero(b)
            rows.append(rr[r])
            cols.append(cc[c])
            vals.append(b[r, c])

        for kind, obj in self.units:
            crange = np.arange(obj.c0, obj.c1)
            if kind == "interior":
                for m in obj.members:
                    mc = np.arange(m.c0, m.c1)
                    put(np.tril(m.diag), mc, mc)
                    if m.nrows_in_block:
                        put(m.offdiag, m.rows[: m.nrows_in_block], mc)
                if obj.off_rows.size:
                    X = obj.solve(obj.coupling.T.toarray(), transpose=False).T
                    put(X, obj.off_rows, crange)
            else:
                if isinstance(obj.diag, diagblocks.DiagBlockTree):
                    put(obj.diag.assemble_dense(), crange, crange)
                else:
                    put(np.tril(obj.diag), crange, crange)
                if obj.rows.size and obj.offdiag is not None:
                    dense_off = (
                        obj.offdiag.dense()
                        if isinstance(obj.offdiag, LowRankBlock)
                        else obj.offdiag
                    )
                    put(dense_off, obj.rows, crange)
        if not rows:
            return sp.csc_matrix((self.n, self.n))
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )


def block_rank(m, n, alpha, p):
    """Rank heuristic: ceil(alpha * sqrt(k) * log2(k)) + p with k=min(m,n),
    capped at k.  Grows like the near-field interaction count of two
    intersecting mesh separators."""
    k = min(int(m), int(n))
    if k <= 0:
        return 0
    r = int(math.ceil(alpha * math.sqrt(k) * math.log2(k))) + int(p)
    return min(r, k)


def _block_seed(master, *tags):
    ss = np.random.SeedSequence((int(master),) + tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# update-source discovery


def collect_sources(L, j):
    """Update sources for supernode j: factored supernodes whose rows reach
    into C_j plus interior blocks coupled to it, ascending by column."""
    c0, c1 = L.partition.cols(j)
    out = []
    for k in range(j):
        nk = L.nodes[k]
        if nk is None or nk.interior_id >= 0:
            continue
        rows = nk.source_rows
        lo, hi = np.searchsorted(rows, (c0, c1))
        if lo < hi:
            out.append(UpdateSource("node", rows, nk.c0, node=nk))
    target = L.nodes[j]
    in_block = target.interior_id if target is not None else -1
    if in_block >= 0:
        # in-block member: its descendants are earlier members of the block
        blk = L.interior[in_block]
        for m in blk.members:
            if m.j >= j:
                break
            rows = m.source_rows
            lo, hi = np.searchsorted(rows, (c0, c1))
            if lo < hi:
                out.append(UpdateSource("node", rows, m.c0, node=m))
    for blk in L.interior:
        if blk.c1 > c0 or not blk.off_rows.size:
            continue
        lo, hi = np.searchsorted(blk.off_rows, (c0, c1))
        if lo < hi:
            out.append(UpdateSource("interior", blk.off_rows, blk.c0, block=blk))
    out.sort(key=lambda s: s.order)
    return out


# ---------------------------------------------------------------------------
# supernode assembly and implicit products


def _assemble_schur(A, j, L, sources, want_off=True):
    """Dense Schur blocks (diagonal, off-diagonal) for supernode j."""
    c0, c1 = L.partition.cols(j)
    R = L.partition.rows[j]
    want_off = want_off and R.size > 0
    full = A.to_csr_full()
    UD = full[c0:c1, c0:c1].toarray()
    UO = full[R, c0:c1].toarray() if want_off else np.zeros((0, c1 - c0))
    for src in sources:
        if src.kind == "interior":
            Yc = src.block.factor_rows(A, np.arange(c0, c1))
            UD -= Yc @ Yc.T
            if want_off:
                Yr = src.block.factor_rows(A, R)
                UO -= Yr @ Yc.T
            continue
        rows = src.rows
        lo, hi = np.searchsorted(rows, (c0, c1))
        if lo == hi:
            continue
        cpos = rows[lo:hi] - c0
        off = src.node.offdiag
        Q = raw_rows(off, slice(lo, hi))
        UD[np.ix_(cpos, cpos)] -= eff_rows(off, slice(lo, hi)) @ Q.T
        if hi < rows.shape[0] and want_off:
            rpos = np.searchsorted(R, rows[hi:])
            UO[np.ix_(rpos, cpos)] -= eff_rows(off, slice(hi, None)) @ Q.T
    return UD, UO


def factor_supernode(A, j, L, sources=None):
    """Dense factorization of supernode j against the partial factor L.

    Returns ``(L_diag, L_off)``: the Cholesky factor of the assembled
    diagonal Schur block and the off-diagonal rows after the triangular
    solve.  Descendant contributions honor whatever representation each
    source currently has (dense, low-rank, or implicit interior rows).
    """
    if sources is None:
        sources = collect_sources(L, j)
    UD, UO = _assemble_schur(A, j, L, sources)
    LD = dense_cholesky(UD)
    LO = tri_solve(LD, UO.T).T if UO.shape[0] else UO
    return LD, LO


def _assemble_offdiag_dense(A, j, L, sources):
    """Explicit off-diagonal block of supernode j using the *stored*
    diagonal factor (which may be hierarchical)."""
    _, UO = _assemble_schur(A, j, L, sources)
    if not UO.shape[0]:
        return UO
    return diagblocks.diagonal_solve(L, j, UO.T, transpose=False).T


def off_diagonal_multiply(A, j, L, G, sources=None):
    """B = L_off_j @ G without forming the off-diagonal block.

    The inverse transpose of j's stored diagonal factor is applied to G
    first; the matrix block and every descendant contribution then act on
    the solved operand.
    """
    c0, c1 = L.partition.cols(j)
    R = L.partition.rows[j]
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    if G.shape[0] != c1 - c0:
        raise ShapeMismatch(f"G must have {c1 - c0} rows, got {G.shape[0]}")
    if R.size == 0 or G.shape[1] == 0:
        return np.zeros((R.size, G.shape[1]))
    if sources is None:
        sources = collect_sources(L, j)
    G1 = diagblocks.diagonal_solve(L, j, G, transpose=True)
    W = A.to_csr_full()[R, c0:c1] @ G1
    for src in sources:
        if src.kind == "interior":
            W -= src.block.multiply(A, R, np.arange(c0, c1), G1)
            continue
        rows = src.rows
        lo, hi = np.searchsorted(rows, (c0, c1))
        if lo == hi or hi == rows.shape[0]:
            continue
        off = src.node.offdiag
        T = raw_rows(off, slice(lo, hi)).T @ G1[rows[lo:hi] - c0]
        W[np.searchsorted(R, rows[hi:])] -= eff_rows(off, slice(hi, None)) @ T
    return W


def off_diagonal_multiply_trans(A, j, L, G, sources=None):
    """B = L_off_j^T @ G, the mirror of :func:`off_diagonal_multiply`
    (descendant row roles swap, the diagonal solve comes last)."""
    c0, c1 = L.partition.cols(j)
    R = L.partition.rows[j]
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    if G.shape[0] != R.size:
        raise ShapeMismatch(f"G must have {R.size} rows, got {G.shape[0]}")
    if G.shape[1] == 0:
        return np.zeros((c1 - c0, 0))
    if sources is None:
        sources = collect_sources(L, j)
    W = A.to_csr_full()[R, c0:c1].T @ G
    for src in sources:
        if src.kind == "interior":
            W -= src.block.multiply(A, np.arange(c0, c1), R, G)
            continue
        rows = src.rows
        lo, hi = np.searchsorted(rows, (c0, c1))
        if lo == hi or hi == rows.shape[0]:
            continue
        off = src.node.offdiag
        T = eff_rows(off, slice(hi, None)).T @ G[np.searchsorted(R, rows[hi:])]
        W[rows[lo:hi] - c0] -= raw_rows(off, slice(lo, hi)) @ T
    return diagblocks.diagonal_solve(L, j, W, transpose=False)


def approximate_off_diagonal(A, j, L, rank, power_iters=1, seed=0, sources=None):
    """Randomized low-rank approximation of supernode j's off-diagonal.

    Samples the row space through the implicit transposed product,
    optionally sharpens it with power iterations, orthonormalizes, and
    projects.  Requires j's diagonal factor to be in place.
    """
    if sources is None:
        sources = collect_sources(L, j)
    R = L.partition.rows[j]
    c0, c1 = L.partition.cols(j)
    rank = min(rank, R.size, c1 - c0)
    G = gaussian_matrix(R.size, rank, seed)
    G = off_diagonal_multiply_trans(A, j, L, G, sources=sources)
    for _ in range(power_iters):
        G = off_diagonal_multiply(A, j, L, G, sources=sources)
        G = off_diagonal_multiply_trans(A, j, L, G, sources=sources)
    U = orthonormalize(G)
    V = off_diagonal_multiply(A, j, L, U, sources=sources)
    return LowRankBlock(V, U)


# ---------------------------------------------------------------------------
# orchestration


def _build_units(septree, partition, tau_o, interior_enabled):
    """Processing order: interior blocks interleaved with the compressed
    separator supernodes, ascending by column range."""
    if not interior_enabled:
        return [("node", j) for j in range(partition.count)]
    units = []

    def members_of(lo, hi):
        j0 = partition.supernode_of(lo)
        j1 = partition.supernode_of(hi - 1)
        return list(range(j0, j1 + 1))

    def walk(node):
        if node is None:
            return
        if node.is_separator and node.size >= tau_o:
            walk(node.left)
            walk(node.right)
            units.append(("node", partition.supernode_of(node.lo)))
        elif node.hi > node.subtree_lo:
            units.append(("interior", members_of(node.subtree_lo, node.hi)))

    walk(septree.root)
    return units


def _numeric_pass(A, L, units, sep_splits, config, alpha_d, counters):
    """One full left-to-right sweep; raises IndefiniteError on a bad pivot."""
    partition = L.partition
    M = partition.count
    L.nodes = [None] * M
    L.interior = []
    L.units = []
    buckets = [[] for _ in range(M)]

    def file_source(src):
        if src.rows.size:
            buckets[partition.supernode_of(int(src.rows[0]))].append(src)

    def advance(src, c1):
        hi = np.searchsorted(src.rows, c1)
        if hi < src.rows.shape[0]:
            buckets[partition.supernode_of(int(src.rows[hi]))].append(src)

    for kind, payload in units:
        if kind == "interior":
            blk = factor_interior_block(A, partition, payload, block_id=len(L.interior))
            L.interior.append(blk)
            for m in blk.members:
                L.nodes[m.j] = m
                partition.interior_id[m.j] = blk.id
            L.units.append(("interior", blk))
            if blk.off_rows.size:
                file_source(UpdateSource("interior", blk.off_rows, blk.c0, block=blk))
            continue

        j = payload
        c0, c1 = partition.cols(j)
        nc = c1 - c0
        R = partition.rows[j]
        srcs = sorted(buckets[j], key=lambda s: s.order)
        buckets[j] = ()
        compress = bool(partition.is_separator[j])

        node = SupernodeFactor(j, c0, c1, R)
        L.nodes[j] = node

        tree_diag = compress and j in sep_splits
        r_off = block_rank(R.size, nc, config.alpha_o, config.oversample)
        compress_off = bool(
            compress and R.size and r_off < DENSE_FALLBACK_FRACTION * min(R.size, nc)
        )

        # diagonal block
        UO = None
        if tree_diag:
            counters["diag_trees"] += 1
            tree = diagblocks.build_diag_tree(nc, config.tau_d, split=sep_splits[j], g0=c0)
            node.diag = tree
            for s in tree.inorder_ids():
                tn = tree.nodes[s]
                if tn.is_leaf:
                    tree.blocks[s] = diagblocks.factor_diagonal(A, L, j, s, sources=srcs)
                    continue
                nrows, ncols = tn.hi - tn.split, tn.split - tn.lo
                r = block_rank(nrows, ncols, alpha_d, config.oversample)
                if r >= DENSE_FALLBACK_FRACTION * min(nrows, ncols):
                    eye = np.eye(ncols)
                    tree.blocks[s] = diagblocks.diagonal_multiply(
                        A, L, j, s, eye, sources=srcs
                    )
                    counters["dense_fallback"] += 1
                else:
                    tree.blocks[s] = diagblocks.approximate_diagonal_block(
                        A, L, j, s, r,
                        power_iters=config.power_iters,
                        seed=_block_seed(config.seed, 1, j, s),
                        sources=srcs,
                    )
                    counters["compressed_diag"] += 1
        else:
            UD, UO = _assemble_schur(A, j, L, srcs, want_off=not compress_off)
            node.diag = dense_cholesky(UD)

        # off-diagonal block
        if R.size == 0:
            node.offdiag = None
        elif compress_off:
            node.offdiag = approximate_off_diagonal(
                A, j, L, r_off,
                power_iters=config.power_iters,
                seed=_block_seed(config.seed, 0, j),
                sources=srcs,
            )
            counters["compressed_off"] += 1
        else:
            if compress:
                counters["dense_fallback"] += 1
            if tree_diag:
                node.offdiag = _assemble_offdiag_dense(A, j, L, srcs)
            else:
                node.offdiag = tri_solve(node.diag, UO.T).T

        L.units.append(("node", node))
        for src in srcs:
            advance(src, c1)
        if R.size:
            file_source(UpdateSource("node", R, c0, node=node))


def factorize(A, config=None, coords=None):
    """Order, analyze and factor A into a rank-structured preconditioner.

    ``coords`` (an :class:`IndexCoordinates` or (n, 3) array, original
    index order) steers both the dissection and the within-separator
    reordering; without them the dissection falls back to level-structure
    bisection and spectral coordinates are computed on demand if any
    diagonal block is large enough to deserve a hierarchical
    representation.

    On an indefinite pivot during diagonal compression the whole
    factorization restarts with ``alpha_d`` grown by ``alpha_d_growth``,
    up to ``max_restarts`` attempts; without any diagonal compression in
    play the error propagates (the input was not positive definite).
    """
    config = config if config is not None else SolverConfig()
    if coords is not None and not isinstance(coords, IndexCoordinates):
        coords = IndexCoordinates(np.asarray(coords, dtype=np.float64), source="geometric-file")

    t0 = time.perf_counter()
    perm1, septree = nested_dissection(A, DEFAULT_LEAF_SIZE, coords=coords)

    # separators that become supernodes, and those that get diagonal trees
    sep_nodes = [nd for nd in septree.separators() if nd.size >= config.tau_o]
    tree_nodes = [nd for nd in sep_nodes if nd.size > DIAG_TREE_FACTOR * config.tau_d]
    splits_by_range = {}
    forward = perm1.forward.copy()
    if tree_nodes:
        eff_coords = coords
        if eff_coords is None:
            eff_coords = spectral_coordinates(A)
            if not eff_coords.converged:
                warnings.warn("using unconverged spectral coordinates for separator ordering")
        for nd in tree_nodes:
            orig = perm1.inverse[nd.lo : nd.hi]
            try:
                reordered, split = partition_separator(eff_coords, orig, config.tau_d)
            except MissingCoordinates:
                reordered = orig
                split = SplitTree.natural(nd.size, config.tau_d)
                warnings.warn("separator ordered naturally (no usable coordinates)")
            forward[reordered] = np.arange(nd.lo, nd.hi, dtype=np.int64)
            splits_by_range[(nd.lo, nd.hi)] = split
    perm = Permutation(forward)
    B = permute_symmetric(A, perm)
    t1 = time.perf_counter()

    etree = build_etree(B)
    partition = form_supernodes(B, etree, septree, config.tau_o)
    compute_row_structures(B, partition)
    sep_splits = {
        partition.supernode_of(lo): split for (lo, hi), split in splits_by_range.items()
    }
    units = _build_units(septree, partition, config.tau_o, config.interior_blocks)
    t2 = time.perf_counter()

    L = RankStructuredFactor(A.n, perm, partition, config)
    alpha_d = config.alpha_d
    history = [alpha_d]
    restarts = 0
    while True:
        counters = {"diag_trees": 0, "compressed_off": 0, "compressed_diag": 0,
                    "dense_fallback": 0}
        try:
            _numeric_pass(B, L, units, sep_splits, config, alpha_d, counters)
            break
        except IndefiniteError:
            if counters["diag_trees"] == 0:
                raise
            restarts += 1
            if restarts > config.max_restarts:
                raise TooManyRestarts(
                    f"still indefinite after {config.max_restarts} restarts "
                    f"(alpha_d reached {alpha_d:g})"
                ) from None
            alpha_d *= config.alpha_d_growth
            history.append(alpha_d)
    t3 = time.perf_counter()

    st = L.stats
    st.n = A.n
    st.nnz_lower = A.nnz_lower
    st.supernodes = partition.count
    st.separator_supernodes = int(partition.is_separator.sum())
    st.interior_block_count = len(L.interior)
    st.compressed_offdiag = counters["compressed_off"]
    st.compressed_diag = counters["compressed_diag"]
    st.dense_fallback = counters["dense_fallback"]
    st.stored_scalars = L.stored_scalars()
    st.restarts = restarts
    st.alpha_d_final = alpha_d
    st.alpha_d_history = history
    st.phase_times = {
        "ordering": t1 - t0,
        "symbolic": t2 - t1,
        "numeric": t3 - t2,
        "total": t3 - t0,
    }
    return L
