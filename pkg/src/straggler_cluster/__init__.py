"""Straggler-resilient distributed clustering through redundant data assignment."""
from .assignment import (
    AssignmentMatrix,
    DeltaExceeded,
    PointUnrecoverable,
    RecoveryError,
    RecoveryVector,
    StragglerModel,
    best_effort_recovery,
    draw_stragglers,
    partition_assignment,
    property_frequency,
    random_assignment,
    recovery_vector,
    theorem_ell,
    theorem_pa,
    verify_property,
)
from .core import (
    CenterSet,
    CostKind,
    Dataset,
    SubspaceSet,
    WeightedDataset,
    assign,
    cluster_of,
    cost_points,
    cost_subspaces,
    distance,
    load_csv,
    save_csv,
)
from .coresets import (
    Coreset,
    RelaxedCoreset,
    identity_coreset,
    merge_coresets,
    relaxed_svd_coreset,
    sample_coreset,
    truncation_rank,
)
from .experiment import ExperimentConfig, experiment_figures, gen_data
from .pipeline import GuaranteeError, RunConfig, RunResult, run, run_kmedian, run_pca, run_subspace
from .solvers import SolverOptions, jacobi_svd, kmedian_exact, kmedian_heuristic, r_pca, subspace_cluster, svd, weiszfeld

__version__ = "0.1.0"
