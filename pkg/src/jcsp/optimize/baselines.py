"""Cache baselines evaluated at a fixed placement."""
from __future__ import annotations

from ..model.edge import (
    PlacementDecision,
    ServiceCatalog,
    allocation_memory_mb,
    apply_cache_allocation,
    build_edge_model,
)
from ..solver.caching import SolverOptions
from ..solver.lqn import solve_lqn, total_response_time
from ..workload.spec import WorkloadSpec
from .evaluate import evaluate_placement


def baseline_no_cache(catalog: ServiceCatalog, workload: WorkloadSpec, x: PlacementDecision,
                      options: SolverOptions = SolverOptions()) -> float:
    """Response time when every item is fetched from the origin server."""
    return evaluate_placement(x, catalog, workload, None, options)


def baseline_prefetch_all(catalog: ServiceCatalog, workload: WorkloadSpec, x: PlacementDecision,
                          options: SolverOptions = SolverOptions()) -> tuple[float, float]:
    """Response time and memory (MB) when every node caches all items of its
    placed services, whatever its cache capacity."""
    model = apply_cache_allocation(build_edge_model(catalog, x, workload), None, workload, prefetch_all=True)
    R = total_response_time(solve_lqn(model, options))
    return R, allocation_memory_mb(catalog, x, None, workload, prefetch_all=True)
