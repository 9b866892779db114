"""Contamination-aware collaborative refinement of client weight matrices.

Builds the stacked matrix of pairwise contrasts between clients' locally
fitted weight matrices, splits it into a low-rank shared part and a
block-sparse contamination part, estimates the shared row subspace and the
set of benign clients, and refines each benign client by averaging the
others through that subspace.
"""

from .contrast import (
    PairIndex,
    StackedPairMatrix,
    all_pairs,
    block_norms,
    block_project,
    build_contrast,
    n_pairs,
    pair_from_flat,
    pair_index,
)
from .decomposition import (
    DecompositionResult,
    RowProjector,
    SubspaceTieWarning,
    canonical_split,
    decompose,
    estimate_rank_largest_gap,
    projector_distance,
    projector_from_rows,
    row_projector,
)
from .detection import (
    DetectionConfig,
    DetectionResult,
    largest_gap_threshold,
    vote_set,
)
from .exceptions import (
    ClairError,
    ConfigError,
    DimensionError,
    DivergenceError,
    EmptyClientSetError,
    IllPosedError,
    InsufficientClientsError,
    InvalidPairError,
    MatrixFormatError,
    NumericError,
    RankError,
)
from .metrics import (
    MethodSummary,
    frob_sq_error,
    oracle_gain_factor,
    set_metrics,
    summarize_method,
)
from .pipeline import ClairConfig, PipelineResult, run_pipeline
from .refinement import (
    RefinementResult,
    fedavg,
    oracle_fedavg,
    refine,
    refine_pairwise,
)
from .simulation import (
    ReplicateReport,
    SimConfig,
    SimScenario,
    ar1_cov,
    gen_scenario,
    ols_fit,
    run_batch,
    run_replicate,
    substream,
)
from .solver import (
    SolverConfig,
    SolverTrace,
    apply_pomega,
    bst,
    objective,
    penalty_ratio_window,
    solve,
    stationarity_ratios,
    svt,
)

__version__ = "0.1.0"

__all__ = [
    "PairIndex",
    "StackedPairMatrix",
    "all_pairs",
    "block_norms",
    "block_project",
    "build_contrast",
    "n_pairs",
    "pair_from_flat",
    "pair_index",
    "DecompositionResult",
    "RowProjector",
    "SubspaceTieWarning",
    "canonical_split",
    "decompose",
    "estimate_rank_largest_gap",
    "projector_distance",
    "projector_from_rows",
    "row_projector",
    "DetectionConfig",
    "DetectionResult",
    "largest_gap_threshold",
    "vote_set",
    "ClairError",
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "EmptyClientSetError",
    "IllPosedError",
    "InsufficientClientsError",
    "InvalidPairError",
    "MatrixFormatError",
    "NumericError",
    "RankError",
    "MethodSummary",
    "frob_sq_error",
    "oracle_gain_factor",
    "set_metrics",
    "summarize_method",
    "ClairConfig",
    "PipelineResult",
    "run_pipeline",
    "RefinementResult",
    "fedavg",
    "oracle_fedavg",
    "refine",
    "refine_pairwise",
    "ReplicateReport",
    "SimConfig",
    "SimScenario",
    "ar1_cov",
    "gen_scenario",
    "ols_fit",
    "run_batch",
    "run_replicate",
    "substream",
    "SolverConfig",
    "SolverTrace",
    "apply_pomega",
    "bst",
    "objective",
    "penalty_ratio_window",
    "solve",
    "stationarity_ratios",
    "svt",
]
