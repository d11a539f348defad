"""Sparse two-share secret sharing over finite fields.

A secret sparse matrix A is split into a padding share R and a padded
share A + R whose entries stay mostly zero. The padding distribution is
chosen to minimise the mutual information each share carries about A
for given share sparsities, and row blocks of both shares are spread
over storage nodes so that any n - xi of them rebuild A.
"""

__version__ = "0.1.0"

from .field import FieldError, FieldOrder, ff_add, ff_neg, ff_sample, ff_sub
from .leakage import (
    ConditionalPmf,
    GeneralConditionalPmf,
    LeakageReport,
    ModelError,
    SourceModel,
    SparsityTargets,
    build_conditional_pmf,
    general_leakage,
    sparsity_levels,
    total_leakage,
)
from .optimizer import (
    ConvergenceError,
    InfeasibleTargetsError,
    OptimizationResult,
    cubic_coefficients,
    feasible_p1_window,
    optimize_general_pmf,
    solve_optimal_pmf,
    sweep_leakage,
)
from .sparse import SparseMatrix, read_matrix_market, write_matrix_market
from .sharing import (
    SharePair,
    empirical_leakage,
    generate_source,
    make_shares,
    reconstruct,
    sample_padding,
)
from .frscheme import (
    AssignmentPlan,
    CostReport,
    InsufficientNodesError,
    PlanError,
    SubShare,
    assignment_plan,
    partition_share,
    per_node_leakage,
    reconstruct_from_nodes,
    sparsity_threshold,
    storage_cost_classical,
    storage_cost_sparse,
)
from .codec import CodecError, decode_sub_share, encode_sub_share, measured_size_bits
from .kernels import BACKEND

__all__ = [name for name in dir() if not name.startswith("_")]
