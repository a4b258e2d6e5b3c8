"""nsdopt - Simulate optimal algorithms for non-smooth distributed convex optimization."""

__version__ = "0.1.0"

from nsdopt.config import (
    ConfigError,
    ConfigNotFoundError,
    ExperimentConfig,
    load_experiment,
)
from nsdopt.drs import (
    ConfigMismatchError,
    DrsConfig,
    drs_config,
    run_drs,
    run_naive_subgradient,
)
from nsdopt.harness import CostModel, OptimumUnknownError, compare_bounds
from nsdopt.models import BoundReport, RunSummary, RunTrace, SweepRow, TraceSample
from nsdopt.mspd import (
    MspdConfig,
    PrimalDualState,
    inner_prox_subgradient,
    mspd_config,
    run_chambolle_pock_exact,
    run_mspd,
)
from nsdopt.network import (
    GossipAssumptionError,
    GossipMatrix,
    Network,
    NetworkError,
    SpanningTree,
    accelerated_gossip,
    diameter,
    gossip_average,
    graph_with_eigengap,
    laplacian,
    spanning_tree,
)
from nsdopt.numerics import (
    DisconnectedSupportError,
    EigendecompositionError,
    SpectralSummary,
    SymmetricMatrix,
    chebyshev_t,
    eigengap,
    project_ball,
    symmetric_eigendecomposition,
)
from nsdopt.objectives import (
    DimensionTooSmallError,
    ObjectiveOracle,
    ProblemInstance,
    SeededStream,
    envelope_global,
    envelope_local,
    exact_optimum,
    make_test_objective,
    smoothed_estimate,
    smoothing_sandwich_check,
    worst_case_global,
    worst_case_local,
)

__all__ = [
    "__version__",
    # Config
    "ConfigError",
    "ConfigNotFoundError",
    "ExperimentConfig",
    "load_experiment",
    # Numerics
    "DisconnectedSupportError",
    "EigendecompositionError",
    "SpectralSummary",
    "SymmetricMatrix",
    "chebyshev_t",
    "eigengap",
    "project_ball",
    "symmetric_eigendecomposition",
    # Objectives
    "DimensionTooSmallError",
    "ObjectiveOracle",
    "ProblemInstance",
    "SeededStream",
    "envelope_global",
    "envelope_local",
    "exact_optimum",
    "make_test_objective",
    "smoothed_estimate",
    "smoothing_sandwich_check",
    "worst_case_global",
    "worst_case_local",
    # Network
    "GossipAssumptionError",
    "GossipMatrix",
    "Network",
    "NetworkError",
    "SpanningTree",
    "accelerated_gossip",
    "diameter",
    "gossip_average",
    "graph_with_eigengap",
    "laplacian",
    "spanning_tree",
    # Harness
    "CostModel",
    "OptimumUnknownError",
    "compare_bounds",
    # Models
    "BoundReport",
    "RunSummary",
    "RunTrace",
    "SweepRow",
    "TraceSample",
    # Algorithms
    "ConfigMismatchError",
    "DrsConfig",
    "MspdConfig",
    "PrimalDualState",
    "drs_config",
    "inner_prox_subgradient",
    "mspd_config",
    "run_chambolle_pock_exact",
    "run_drs",
    "run_mspd",
    "run_naive_subgradient",
]
