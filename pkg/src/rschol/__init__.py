"""rschol: rank-structured sparse Cholesky preconditioning.

Builds an approximate supernodal Cholesky factorization of a sparse SPD
matrix in which the interaction blocks of large nested-dissection
separators are replaced by randomized low-rank approximations, and uses
it as a robust preconditioner for conjugate gradients.
"""

from .blocks import LowRankBlock, SupernodeFactor
from .diagblocks import (
    DiagBlockTree,
    approximate_diagonal_block,
    build_diag_tree,
    diagonal_multiply,
    diagonal_solve,
    factor_diagonal,
)
from .errors import (
    BreakdownNonSPD,
    DimensionMismatch,
    IndefiniteError,
    MissingCoordinates,
    MissingDiagonal,
    NoConvergenceWarning,
    NonPositiveDiagonal,
    NotSubset,
    NotSymmetric,
    ParseError,
    RscholError,
    ShapeMismatch,
    SingularDiagonal,
    TooManyRestarts,
)
from .factor import (
    FactorStats,
    RankStructuredFactor,
    SolverConfig,
    approximate_off_diagonal,
    block_rank,
    collect_sources,
    factor_supernode,
    factorize,
    off_diagonal_multiply,
    off_diagonal_multiply_trans,
)
from .interior import (
    InteriorBlock,
    factor_interior_block,
    interior_block_multiply,
    interior_block_subrows,
)
from .kernels import (
    dense_cholesky,
    gaussian_matrix,
    low_rank_approx,
    orthonormalize,
    tri_solve,
)
from .ordering import (
    IndexCoordinates,
    SeparatorTree,
    SplitTree,
    graph_laplacian,
    nested_dissection,
    partition_separator,
    read_coordinates,
    spectral_coordinates,
    write_coordinates,
)
from .pcg import SolveReport, apply_preconditioner, jacobi_preconditioner, pcg_solve
from .sparse import (
    Permutation,
    SparseSpdMatrix,
    gather_rows,
    permute_symmetric,
    read_matrix_market,
    scatter,
    scatter_columns,
    scatter_rows,
    write_matrix_market,
)
from .symbolic import (
    DescendantMap,
    EliminationTree,
    SupernodePartition,
    build_etree,
    col_counts,
    compute_row_structures,
    descendants,
    form_supernodes,
    postorder,
)

__version__ = "0.1.0"
