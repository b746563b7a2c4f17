"""Fill-reducing ordering with explicit separator tracking.

Nested dissection recursively bisects the adjacency graph of the matrix,
numbering each vertex separator after the two subdomains it disconnects.
Three bisection strategies are available:

* ``level``     - BFS level-structure bisection from a pseudo-peripheral
                  vertex, with the vertex separator taken from the cut
                  boundary.  Pure graph information, the default.
* ``geometric`` - recursive coordinate bisection along the longest
                  bounding-box axis.  Used automatically when vertex
                  coordinates are supplied; on mesh-like problems it
                  produces the axis-aligned separators that the block
                  compression heuristics are tuned for.
* ``spectral``  - Fiedler-vector bisection (fallback / experimentation).

The module also computes spectral vertex coordinates from the graph
Laplacian and the within-separator spatial partition that drives
hierarchical diagonal block compression.
"""

import warnings
from collections import deque

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import MissingCoordinates, NoConvergenceWarning, ParseError
from .sparse import Permutation

__all__ = [
    "SeparatorNode",
    "SeparatorTree",
    "nested_dissection",
    "IndexCoordinates",
    "spectral_coordinates",
    "graph_laplacian",
    "partition_separator",
    "SplitTree",
    "read_coordinates",
    "write_coordinates",
]

DEFAULT_LEAF_SIZE = 64


class SeparatorNode:
    """One node of the dissection tree, in post-permutation indices.

    A separator node owns the separator vertices ``[lo, hi)`` and two
    children covering the subdomains it disconnects; a leaf owns an
    undissected subdomain.  ``subtree_lo`` is the first vertex of the
    whole subtree, which is contiguous as ``[subtree_lo, hi)``.
    """

    __slots__ = ("lo", "hi", "subtree_lo", "level", "left", "right")

    def __init__(self, lo, hi, subtree_lo, level, left=None, right=None):
        self.lo = lo
        self.hi = hi
        self.subtree_lo = subtree_lo
        self.level = level
        self.left = left
        self.right = right

    @property
    def is_separator(self):
        return self.left is not None

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def vertices(self):
        return np.arange(self.lo, self.hi, dtype=np.int64)


class SeparatorTree:
    """Dissection tree over the permuted index range 0..n-1."""

    def __init__(self, n, root):
        self.n = n
        self.root = root

    def separators(self, min_size=0):
        """Yield separator nodes (pre-order) with at least ``min_size`` vertices."""
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if node.is_separator:
                if node.size >= min_size:
                    yield node
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self):
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            if node.is_separator:
                stack.append(node.right)
                stack.append(node.left)
            else:
                yield node


# ---------------------------------------------------------------------------
# graph helpers


def _adjacency(A):
    """CSR adjacency (no self loops) of the matrix graph."""
    full = A.to_csr_full()
    adj = full - sp.diags(full.diagonal())
    adj = adj.tocsr()
    adj.eliminate_zeros()
    return adj


def _components(indptr, indices, verts, local):
    """Connected components of the induced subgraph on ``verts``.

    ``local`` maps global vertex -> position in verts (-1 elsewhere).
    Returns a list of global-vertex arrays.
    """
    nv = len(verts)
    seen = np.zeros(nv, dtype=bool)
    comps = []
    for s in range(nv):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        dq = deque([s])
        while dq:
            u = dq.popleft()
            g = verts[u]
            for w in indices[indptr[g] : indptr[g + 1]]:
                lw = local[w]
                if lw >= 0 and not seen[lw]:
                    seen[lw] = True
                    comp.append(lw)
                    dq.append(lw)
        comps.append(verts[np.sort(np.asarray(comp))])
    return comps


def _bfs_levels(indptr, indices, verts, local, start_local):
    """BFS level of every vertex of the induced subgraph (-1 unreachable)."""
    nv = len(verts)
    level = np.full(nv, -1, dtype=np.int64)
    level[start_local] = 0
    dq = deque([start_local])
    while dq:
        u = dq.popleft()
        g = verts[u]
        for w in indices[indptr[g] : indptr[g + 1]]:
            lw = local[w]
            if lw >= 0 and level[lw] < 0:
                level[lw] = level[u] + 1
                dq.append(lw)
    return level


def _pseudo_peripheral(indptr, indices, verts, local):
    """A vertex of near-maximal eccentricity (local index)."""
    r = 0
    ecc = -1
    for _ in range(8):
        level = _bfs_levels(indptr, indices, verts, local, r)
        far = int(level.max())
        if far <= ecc:
            break
        ecc = far
        # smallest-index vertex in the last level, for determinism
        r = int(np.nonzero(level == far)[0][0])
    return r, level


def _side2_boundary(indptr, indices, verts, local, in_side1, side2_local):
    """Vertices of side2 with a neighbor in side1 (a vertex separator)."""
    sep = []
    for u in side2_local:
        g = verts[u]
        for w in indices[indptr[g] : indptr[g + 1]]:
            lw = local[w]
            if lw >= 0 and in_side1[lw]:
                sep.append(u)
                break
    return np.asarray(sep, dtype=np.int64)


def _bisect_level(indptr, indices, verts, local):
    """Level-structure edge bisection + boundary vertex separator.

    Returns (side1, sep, side2) as global vertex arrays, or None when no
    usable split exists (e.g. complete graphs).
    """
    r, level = _pseudo_peripheral(indptr, indices, verts, local)
    nlev = int(level.max()) + 1
    if nlev < 2:
        return None
    sizes = np.bincount(level, minlength=nlev)
    cum = np.concatenate(([0], np.cumsum(sizes)))
    total = len(verts)
    # cut before level l: side1 = levels < l, separator taken from level l
    best_l, best_bal = 1, None
    for l in range(1, nlev):
        bal = abs(cum[l] - (total - cum[l] - sizes[l]))
        if best_bal is None or bal < best_bal:
            best_l, best_bal = l, bal
    l = best_l
    side1_local = np.nonzero(level < l)[0]
    rest_local = np.nonzero(level >= l)[0]
    in_side1 = level < l
    cand_local = np.nonzero(level == l)[0]
    sep_local = _side2_boundary(indptr, indices, verts, local, in_side1, cand_local)
    in_sep = np.zeros(len(verts), dtype=bool)
    in_sep[sep_local] = True
    side2_local = rest_local[~in_sep[rest_local]]
    if side1_local.size == 0 or side2_local.size == 0:
        return None
    return verts[side1_local], verts[sep_local], verts[side2_local]


def _bisect_by_order(indptr, indices, verts, local, order):
    """Halve ``verts`` along a precomputed order and extract the separator."""
    nv = len(verts)
    half = (nv + 1) // 2
    side1_local = np.sort(order[:half])
    rest_local = np.sort(order[half:])
    in_side1 = np.zeros(nv, dtype=bool)
    in_side1[side1_local] = True
    sep_local = _side2_boundary(indptr, indices, verts, local, in_side1, rest_local)
    in_sep = np.zeros(nv, dtype=bool)
    in_sep[sep_local] = True
    side2_local = rest_local[~in_sep[rest_local]]
    if side1_local.size == 0 or side2_local.size == 0:
        return None
    return verts[side1_local], verts[sep_local], verts[side2_local]


def _bisect_geometric(indptr, indices, verts, local, xyz):
    pts = xyz[verts]
    extent = pts.max(axis=0) - pts.min(axis=0)
    axis = int(np.argmax(extent))
    order = np.lexsort((verts, pts[:, axis]))
    return _bisect_by_order(indptr, indices, verts, local, order)


def _bisect_spectral(indptr, indices, verts, local):
    sub = _induced_laplacian(indptr, indices, verts, local)
    vecs, _, _ = _lanczos_smallest(sub, k=2, tol=1e-2, max_iter=80)
    fiedler = vecs[:, 1]
    order = np.lexsort((verts, fiedler))
    return _bisect_by_order(indptr, indices, verts, local, order)


def _induced_laplacian(indptr, indices, verts, local):
    rows, cols = [], []
    for u in range(len(verts)):
        g = verts[u]
        for w in indices[indptr[g] : indptr[g + 1]]:
            lw = local[w]
            if lw >= 0:
                rows.append(u)
                cols.append(lw)
    adj = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(verts), len(verts))
    )
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return sp.diags(deg) - adj


def nested_dissection(A, leaf_size=DEFAULT_LEAF_SIZE, coords=None, method="auto"):
    """Nested-dissection permutation with an explicit separator tree.

    Recursively bisects A's adjacency graph until pieces have at most
    ``leaf_size`` vertices; every separator is numbered after both of its
    subdomains (post-order, left before right).  Disconnected pieces are
    split by empty separators, so the tree stays binary.

    Returns ``(perm, tree)`` where ``perm.forward`` maps original to
    permuted indices and ``tree`` records separator vertex ranges in the
    permuted numbering.
    """
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    if method == "auto":
        method = "geometric" if coords is not None else "level"
    if method == "geometric":
        if coords is None:
            raise MissingCoordinates("geometric dissection needs coordinates")
        xyz = coords.xyz if isinstance(coords, IndexCoordinates) else np.asarray(coords)
        if xyz.shape[0] != A.n:
            raise MissingCoordinates("need one coordinate row per matrix index")
    else:
        xyz = None

    n = A.n
    if n == 0:
        return Permutation.identity(0), SeparatorTree(0, None)
    adj = _adjacency(A)
    indptr, indices = adj.indptr, adj.indices
    local = np.full(n, -1, dtype=np.int64)

    order = np.empty(n, dtype=np.int64)  # order[new] = old
    counter = [0]

    def emit(verts):
        k = len(verts)
        lo = counter[0]
        order[lo : lo + k] = np.sort(verts)
        counter[0] += k
        return lo, lo + k

    def bisect(verts):
        local[verts] = np.arange(len(verts))
        if method == "geometric":
            split = _bisect_geometric(indptr, indices, verts, local, xyz)
        elif method == "spectral":
            split = _bisect_spectral(indptr, indices, verts, local)
        else:
            split = _bisect_level(indptr, indices, verts, local)
        local[verts] = -1
        return split

    def dissect(verts, level, connected):
        subtree_lo = counter[0]
        if len(verts) <= leaf_size:
            lo, hi = emit(verts)
            return SeparatorNode(lo, hi, subtree_lo, level)
        if not connected and method != "geometric":
            local[verts] = np.arange(len(verts))
            comps = _components(indptr, indices, verts, local)
            local[verts] = -1
            if len(comps) > 1:
                # group components into two balanced halves under an
                # empty separator so the tree stays binary
                comps.sort(key=lambda c: (-len(c), c[0]))
                g1, g2, s1, s2 = [], [], 0, 0
                for c in comps:
                    if s1 <= s2:
                        g1.append(c)
                        s1 += len(c)
                    else:
                        g2.append(c)
                        s2 += len(c)
                left = dissect(np.sort(np.concatenate(g1)), level + 1, len(g1) == 1)
                right = dissect(np.sort(np.concatenate(g2)), level + 1, len(g2) == 1)
                lo = hi = counter[0]
                return SeparatorNode(lo, hi, subtree_lo, level, left, right)
        split = bisect(verts)
        if split is None:
            lo, hi = emit(verts)
            return SeparatorNode(lo, hi, subtree_lo, level)
        side1, sep, side2 = split
        left = dissect(side1, level + 1, False)
        right = dissect(side2, level + 1, False)
        lo, hi = emit(sep)
        return SeparatorNode(lo, hi, subtree_lo, level, left, right)

    root = dissect(np.arange(n, dtype=np.int64), 0, False)
    forward = np.empty(n, dtype=np.int64)
    forward[order] = np.arange(n, dtype=np.int64)
    return Permutation(forward), SeparatorTree(n, root)


# ---------------------------------------------------------------------------
# spectral coordinates


class IndexCoordinates:
    """Per-index 3D positions, from a geometry file or a spectral embedding."""

    def __init__(self, xyz, source, converged=True):
        self.xyz = np.ascontiguousarray(xyz, dtype=np.float64)
        if self.xyz.ndim != 2 or self.xyz.shape[1] != 3:
            raise MissingCoordinates("coordinates must be (n, 3)")
        if not np.all(np.isfinite(self.xyz)):
            raise MissingCoordinates("coordinates must be finite")
        self.source = source
        self.converged = converged

    @property
    def n(self):
        return self.xyz.shape[0]


def graph_laplacian(A):
    """Graph Laplacian of A's sparsity pattern (degree minus adjacency)."""
    adj = _adjacency(A)
    pattern = adj.copy()
    pattern.data[:] = 1.0
    deg = np.asarray(pattern.sum(axis=1)).ravel()
    return (sp.diags(deg) - pattern).tocsr()


def _lanczos_smallest(L, k, tol, max_iter, deflate=None):
    """Ritz approximations to the k smallest eigenpairs of a sparse SPSD L.

    Lanczos with full reorthogonalization, optionally deflating given
    orthonormal vectors.  Returns (vectors, values, converged); residual
    targets are relative to a Gershgorin bound on ||L||.
    """
    n = L.shape[0]
    kk = min(k, n)
    norm_bound = max(float(np.abs(L).sum(axis=1).max()), 1e-30)
    dense_cut = max(3 * kk + 2, 16)
    if n <= dense_cut or n <= max(kk, 2):
        Ld = L.toarray()
        if deflate is not None:
            # push deflated directions to the top of the spectrum
            Ld = Ld + (4.0 * norm_bound) * (deflate @ deflate.T)
        w, v = sla.eigh(Ld)
        return v[:, :kk], w[:kk], True

    rng = np.random.Generator(np.random.PCG64(0x5EED))

    def project(x):
        if deflate is not None:
            x = x - deflate @ (deflate.T @ x)
        return x

    m_max = min(max_iter, n - 1)
    Q = np.zeros((n, m_max + 1))
    alphas, betas = [], []
    q = project(rng.standard_normal(n))
    q /= np.linalg.norm(q)
    Q[:, 0] = q
    converged = False
    m = 0
    for m in range(1, m_max + 1):
        w = L @ Q[:, m - 1]
        a = float(Q[:, m - 1] @ w)
        alphas.append(a)
        w = w - a * Q[:, m - 1]
        if m > 1:
            w = w - betas[-1] * Q[:, m - 2]
        w = project(w)
        w = w - Q[:, :m] @ (Q[:, :m].T @ w)  # full reorthogonalization
        b = float(np.linalg.norm(w))
        if b < 1e-14 * norm_bound:
            converged = True
            break
        betas.append(b)
        Q[:, m] = w / b
        if m >= kk and (m % 5 == 0 or m == m_max):
            T = np.diag(alphas) + np.diag(betas[: m - 1], 1) + np.diag(betas[: m - 1], -1)
            tw, tv = sla.eigh(T)
            resid = np.abs(b * tv[-1, :kk])
            if np.all(resid <= tol * norm_bound):
                converged = True
                break
    m_eff = len(alphas)
    T = np.diag(alphas) + np.diag(betas[: m_eff - 1], 1) + np.diag(betas[: m_eff - 1], -1)
    tw, tv = sla.eigh(T)
    take = min(kk, m_eff)
    vecs = Q[:, :m_eff] @ tv[:, :take]
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    return vecs, tw[:take], converged


def spectral_coordinates(A, tol=1e-2, max_iter=300):
    """3D positions from the three lowest graph-Laplacian eigenvectors.

    The constant vector (eigenvalue 0) is deflated explicitly and becomes
    the first coordinate; the next two eigenvectors are computed by a
    Lanczos iteration at low accuracy, which is all the downstream
    geometric splitting needs.  If the iteration stalls the best available
    vectors are returned and ``converged`` is set to False alongside a
    :class:`NoConvergenceWarning`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = A.n
    L = graph_laplacian(A)
    ones = np.full((n, 1), 1.0 / np.sqrt(n))
    vecs, _, ok = _lanczos_smallest(L, k=2, tol=tol, max_iter=max_iter, deflate=ones)
    xyz = np.column_stack([ones.ravel(), vecs[:, : min(2, vecs.shape[1])]])
    while xyz.shape[1] < 3:  # tiny graphs may not have 3 directions
        xyz = np.column_stack([xyz, np.zeros(n)])
    if not ok:
        warnings.warn(
            f"eigensolver did not reach tol={tol} within {max_iter} iterations",
            NoConvergenceWarning,
        )
    return IndexCoordinates(xyz, source="spectral", converged=ok)


# ---------------------------------------------------------------------------
# within-separator spatial partition


class SplitTree:
    """Recursive halving of an index block: sizes only, leaves <= tau_d."""

    __slots__ = ("size", "left", "right")

    def __init__(self, size, left=None, right=None):
        self.size = size
        self.left = left
        self.right = right

    @property
    def is_leaf(self):
        return self.left is None

    def leaf_sizes(self):
        if self.is_leaf:
            return [self.size]
        return self.left.leaf_sizes() + self.right.leaf_sizes()

    @classmethod
    def natural(cls, size, tau_d):
        """Ceil-halving split of a block with no coordinate information."""
        if size <= tau_d:
            return cls(size)
        half = (size + 1) // 2
        return cls(size, cls.natural(half, tau_d), cls.natural(size - half, tau_d))


def partition_separator(coords, C, tau_d):
    """Spatially reorder separator indices for diagonal-block compression.

    Recursively sorts C along the longest bounding-box axis of its
    coordinates and halves the sorted list (left half gets the extra
    element) until pieces have at most ``tau_d`` indices.  Returns the
    reordered index array and the :class:`SplitTree` describing the
    recursion; sibling leaves then correspond to spatially separated
    pieces of the separator.
    """
    C = np.asarray(C, dtype=np.int64)
    if coords is None or not isinstance(coords, IndexCoordinates):
        raise MissingCoordinates("partition_separator needs IndexCoordinates")
    if C.size and C.max() >= coords.n:
        raise MissingCoordinates("coordinates missing for some separator indices")
    xyz = coords.xyz

    def rec(idx):
        if len(idx) <= tau_d:
            return idx, SplitTree(len(idx))
        pts = xyz[idx]
        extent = pts.max(axis=0) - pts.min(axis=0)
        axis = int(np.argmax(extent))
        idx = idx[np.lexsort((idx, pts[:, axis]))]
        half = (len(idx) + 1) // 2
        li, lt = rec(idx[:half])
        ri, rt = rec(idx[half:])
        return np.concatenate([li, ri]), SplitTree(len(idx), lt, rt)

    return rec(C)


# ---------------------------------------------------------------------------
# coordinate file I/O


def read_coordinates(path, n=None):
    """Read whitespace-separated ``x y z`` lines, one per matrix index."""
    rows = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise ParseError(f"bad coordinate line: {s!r}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"bad coordinate line: {s!r}") from exc
    xyz = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    if n is not None and xyz.shape[0] != n:
        raise ParseError(f"expected {n} coordinate lines, found {xyz.shape[0]}")
    return IndexCoordinates(xyz, source="geometric-file")


def write_coordinates(coords_or_xyz, path):
    xyz = (
        coords_or_xyz.xyz
        if isinstance(coords_or_xyz, IndexCoordinates)
        else np.asarray(coords_or_xyz)
    )
    with open(path, "w", encoding="ascii") as f:
        for x, y, z in xyz:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
