from .caching import (
    CacheLower,
    CacheUpper,
    CachingResult,
    CachingSubmodelState,
    SolverOptions,
    fpi_lambda_update,
    solve_caching_submodel,
)
from .layers import LayerStructure, Station, SubModel, analyze_layers, decompose_layers
from .lqn import (
    CacheRow,
    ConvergenceReport,
    EntityRow,
    JobClass,
    SolverResult,
    solve_lqn,
    split_caching_submodel,
    total_response_time,
)
from .mva import ClosedNetwork, MvaResult, SolverConvergenceError, amva_solve, exact_mva_solve

__all__ = [
    "CacheLower",
    "CacheRow",
    "CacheUpper",
    "CachingResult",
    "CachingSubmodelState",
    "ClosedNetwork",
    "ConvergenceReport",
    "EntityRow",
    "JobClass",
    "LayerStructure",
    "MvaResult",
    "SolverConvergenceError",
    "SolverOptions",
    "SolverResult",
    "Station",
    "SubModel",
    "amva_solve",
    "analyze_layers",
    "decompose_layers",
    "exact_mva_solve",
    "fpi_lambda_update",
    "solve_caching_submodel",
    "solve_lqn",
    "split_caching_submodel",
    "total_response_time",
]
