"""Single-process simulator for communication-efficient federated optimization.

Trains L2-regularized sparse logistic regression over many virtual nodes
holding non-IID, unbalanced data shards, and benchmarks round-based solvers
against full-gradient and dual coordinate-ascent baselines.
"""

__version__ = "0.1.0"

from fedopt._kernels import BACKEND
from fedopt.baselines import (
    CocoaConfig,
    ConvergenceError,
    DualState,
    GdConfig,
    LineSearchError,
    cocoa_round,
    dual_objective,
    duality_gap,
    gd_round,
    init_dual,
    solve_optimum,
)
from fedopt.data import (
    DataFormatError,
    SparseDataset,
    SparseExample,
    axpy_sparse,
    load_libsvm,
    save_libsvm,
    sparse_dot,
)
from fedopt.generator import GenConfig, GeneratedData, generate, save_generated, summarize
from fedopt.harness import ExperimentConfig, RoundMetrics, emit_plot, run_experiment
from fedopt.objective import LogisticObjective
from fedopt.partitioning import (
    Partition,
    PartitionStats,
    aggregation_weights,
    compute_stats,
    load_partition,
    local_scaling,
    partition_by_group,
    reshuffle,
    save_partition,
)
from fedopt.svrg import (
    DivergenceError,
    FedSvrgConfig,
    NodeUpdate,
    RoundRecord,
    RoundState,
    aggregate,
    local_epoch,
    load_checkpoint,
    node_stepsize,
    run,
    save_checkpoint,
)

__all__ = [
    "BACKEND",
    "CocoaConfig",
    "ConvergenceError",
    "DataFormatError",
    "DivergenceError",
    "DualState",
    "ExperimentConfig",
    "FedSvrgConfig",
    "GdConfig",
    "GenConfig",
    "GeneratedData",
    "LineSearchError",
    "LogisticObjective",
    "NodeUpdate",
    "Partition",
    "PartitionStats",
    "RoundMetrics",
    "RoundRecord",
    "RoundState",
    "SparseDataset",
    "SparseExample",
    "__version__",
    "aggregate",
    "aggregation_weights",
    "axpy_sparse",
    "cocoa_round",
    "compute_stats",
    "dual_objective",
    "duality_gap",
    "emit_plot",
    "gd_round",
    "generate",
    "init_dual",
    "load_checkpoint",
    "load_libsvm",
    "load_partition",
    "local_epoch",
    "local_scaling",
    "node_stepsize",
    "partition_by_group",
    "reshuffle",
    "run",
    "run_experiment",
    "save_checkpoint",
    "save_generated",
    "save_libsvm",
    "save_partition",
    "solve_optimum",
    "sparse_dot",
    "summarize",
]
