"""Nested dissection, spectral coordinates, separator partitioning."""

import numpy as np
import pytest

import rschol as rs
from rschol.errors import MissingCoordinates
from rschol.ordering import SplitTree
from rschol.problems import laplacian_2d, laplacian_3d

from conftest import path_matrix


def no_cross_edges(A, perm, node):
    """True when the permuted matrix has no entry coupling the two child
    subtree ranges of a separator node."""
    B = rs.permute_symmetric(A, perm)
    D = B.dense() != 0
    l0, l1 = node.left.subtree_lo, node.left.hi
    r0, r1 = node.right.subtree_lo, node.right.hi
    return not D[r0:r1, l0:l1].any()


def check_tree(A, perm, tree):
    """Structural invariants: post-order numbering and separation."""
    def rec(node):
        if not node.is_separator:
            return
        assert node.lo >= node.left.hi and node.lo >= node.right.hi
        assert no_cross_edges(A, perm, node)
        rec(node.left)
        rec(node.right)

    if tree.root is not None:
        rec(tree.root)


class TestNestedDissection:
    def test_3_path(self):
        A = path_matrix(3)
        perm, tree = rs.nested_dissection(A, leaf_size=1)
        root = tree.root
        assert root.is_separator and root.size == 1
        assert perm.inverse[root.lo] == 1  # middle vertex is the separator
        assert perm.forward[1] == 2  # numbered last
        check_tree(A, perm, tree)

    def test_7_path(self):
        A = path_matrix(7)
        perm, tree = rs.nested_dissection(A, leaf_size=1)
        root = tree.root
        assert root.size == 1 and perm.inverse[root.lo] == 3
        subs = {
            int(perm.inverse[nd.lo])
            for nd in (root.left, root.right)
            if nd.is_separator
        }
        assert subs == {1, 5}
        check_tree(A, perm, tree)

    def test_5x5_grid(self):
        A, _ = laplacian_2d(5)
        perm, tree = rs.nested_dissection(A, leaf_size=1)
        assert tree.root.size == 5
        check_tree(A, perm, tree)

    def test_5x5_grid_geometric_is_a_line(self):
        A, coords = laplacian_2d(5)
        perm, tree = rs.nested_dissection(A, leaf_size=1, coords=coords)
        sep = perm.inverse[tree.root.lo : tree.root.hi]
        x, y = np.unravel_index(np.sort(sep), (5, 5))
        assert tree.root.size == 5
        assert len(set(x)) == 1 or len(set(y)) == 1  # row or column line
        check_tree(A, perm, tree)

    @pytest.mark.parametrize("method", ["level", "geometric", "spectral"])
    def test_grid_3d_valid(self, method):
        A, coords = laplacian_3d(5)
        kw = {"coords": coords} if method == "geometric" else {}
        perm, tree = rs.nested_dissection(A, leaf_size=8, method=method, **kw)
        check_tree(A, perm, tree)
        assert np.array_equal(np.sort(perm.forward), np.arange(A.n))

    def test_disconnected_components(self):
        blocks = [path_matrix(5).dense(), path_matrix(4).dense(), path_matrix(3).dense()]
        n = sum(b.shape[0] for b in blocks)
        M = np.zeros((n, n))
        ofs = 0
        for b in blocks:
            k = b.shape[0]
            M[ofs : ofs + k, ofs : ofs + k] = b
            ofs += k
        A = rs.SparseSpdMatrix.from_dense(M)
        perm, tree = rs.nested_dissection(A, leaf_size=2)
        check_tree(A, perm, tree)

    def test_complete_graph_becomes_leaf(self):
        M = np.full((6, 6), -1.0) + 8 * np.eye(6)
        A = rs.SparseSpdMatrix.from_dense(M)
        perm, tree = rs.nested_dissection(A, leaf_size=2)
        check_tree(A, perm, tree)

    def test_empty_matrix(self):
        A = rs.SparseSpdMatrix(0, np.zeros(1, np.int64), np.zeros(0, np.int64), np.zeros(0))
        perm, tree = rs.nested_dissection(A)
        assert perm.n == 0 and tree.root is None

    def test_leaf_sizes_respected(self):
        A, coords = laplacian_2d(12)
        _, tree = rs.nested_dissection(A, leaf_size=10, coords=coords)
        for leaf in tree.leaves():
            assert leaf.size <= 10


class TestSpectralCoordinates:
    def test_constant_first_coordinate(self, lap2d_16):
        A, _ = lap2d_16
        c = rs.spectral_coordinates(A)
        assert c.source == "spectral"
        assert np.allclose(c.xyz[:, 0], c.xyz[0, 0])
        for k in range(3):
            assert abs(np.linalg.norm(c.xyz[:, k]) - 1) < 1e-8 or not c.xyz[:, k].any()

    def test_8_path_fiedler_monotone(self):
        A = path_matrix(8)
        c = rs.spectral_coordinates(A, tol=1e-8)
        d = np.diff(c.xyz[:, 1])
        assert np.all(d > 0) or np.all(d < 0)

    def test_two_cliques_separated(self):
        M = np.zeros((8, 8))
        for grp in (range(4), range(4, 8)):
            for i in grp:
                for j in grp:
                    M[i, j] = 4.0 if i == j else -0.5
        A = rs.SparseSpdMatrix.from_dense(M)
        c = rs.spectral_coordinates(A, tol=1e-8)
        a, b = c.xyz[:4, 1], c.xyz[4:, 1]
        assert np.allclose(a, a[0], atol=1e-6)
        assert np.allclose(b, b[0], atol=1e-6)
        assert abs(a[0] - b[0]) > 0.1

    def test_low_accuracy_residuals(self, lap3d_8):
        A, _ = lap3d_8
        tol = 1e-2
        c = rs.spectral_coordinates(A, tol=tol)
        assert c.converged
        L = rs.graph_laplacian(A)
        bound = float(np.abs(L).sum(axis=1).max())
        for k in (1, 2):
            v = c.xyz[:, k]
            lam = float(v @ (L @ v))
            res = np.linalg.norm(L @ v - lam * v)
            assert res <= 2 * tol * bound

    def test_no_convergence_warning(self, lap3d_8):
        A, _ = lap3d_8
        with pytest.warns(rs.NoConvergenceWarning):
            c = rs.spectral_coordinates(A, tol=1e-14, max_iter=4)
        assert not c.converged
        assert np.all(np.isfinite(c.xyz))


class TestPartitionSeparator:
    def coords_of(self, pts):
        return rs.IndexCoordinates(np.asarray(pts, dtype=float), source="geometric-file")

    def test_small_block_single_leaf(self):
        coords = self.coords_of(np.random.default_rng(0).standard_normal((10, 3)))
        C = np.arange(4)
        order, tree = rs.partition_separator(coords, C, tau_d=5)
        assert np.array_equal(order, C)
        assert tree.is_leaf and tree.size == 4

    def test_collinear_points(self):
        pts = np.zeros((4, 3))
        pts[:, 0] = [0, 1, 2, 3]
        order, tree = rs.partition_separator(self.coords_of(pts), np.arange(4), tau_d=2)
        assert np.array_equal(order, [0, 1, 2, 3])
        assert tree.leaf_sizes() == [2, 2]

    def test_2x4_grid_splits_long_axis_first(self):
        pts = [(x, y, 0.0) for x in range(4) for y in range(2)]
        order, tree = rs.partition_separator(self.coords_of(pts), np.arange(8), tau_d=2)
        assert sorted(order.tolist()) == list(range(8))
        assert tree.leaf_sizes() == [2, 2, 2, 2]
        # first split separates x<2 from x>=2; leaf bounding boxes of
        # siblings are disjoint along the split axis
        left = set(order[:4].tolist())
        assert left == {0, 1, 2, 3}
        pts = np.asarray(pts)
        ofs = 0
        for sz in tree.leaf_sizes():
            leaf = order[ofs : ofs + sz]
            assert np.ptp(pts[leaf, 0]) == 0  # each leaf sits at one x station
            ofs += sz

    def test_odd_split_left_heavy(self):
        pts = np.zeros((5, 3))
        pts[:, 0] = np.arange(5)
        order, tree = rs.partition_separator(self.coords_of(pts), np.arange(5), tau_d=2)
        assert tree.left.size == 3 and tree.right.size == 2

    def test_is_permutation(self):
        rng = np.random.default_rng(8)
        pts = rng.standard_normal((40, 3))
        C = rng.choice(40, size=25, replace=False)
        order, _ = rs.partition_separator(self.coords_of(pts), np.sort(C), tau_d=4)
        assert sorted(order.tolist()) == sorted(C.tolist())

    def test_missing_coordinates(self):
        with pytest.raises(MissingCoordinates):
            rs.partition_separator(None, np.arange(3), tau_d=2)
        coords = self.coords_of(np.zeros((2, 3)))
        with pytest.raises(MissingCoordinates):
            rs.partition_separator(coords, np.arange(5), tau_d=2)

    def test_natural_split_tree(self):
        t = SplitTree.natural(10, 3)
        assert sum(t.leaf_sizes()) == 10
        assert max(t.leaf_sizes()) <= 3


class TestGraphLaplacian:
    def test_row_sums_zero_and_psd(self, lap2d_16):
        A, _ = lap2d_16
        L = rs.graph_laplacian(A)
        assert np.abs(np.asarray(L.sum(axis=1))).max() == 0
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(A.n)
            assert x @ (L @ x) >= -1e-12
        ones = np.ones(A.n)
        assert np.linalg.norm(L @ ones) == 0
