"""Objective evaluation: build the layered model of a decision and solve it."""
from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from ..model.edge import (
    CacheAllocation,
    PlacementDecision,
    ServiceCatalog,
    allocation_memory_mb,
    apply_cache_allocation,
    build_edge_model,
    feasible_nodes,
)
from ..solver.caching import SolverOptions
from ..solver.lqn import solve_lqn, total_response_time
from ..solver.mva import SolverConvergenceError
from ..workload.spec import WorkloadSpec

DEFAULT_ORACLE_LIMIT = 10_000
# relative margin below which two objective values count as a tie
TIE_RTOL = 1e-9


class InstanceTooLargeError(ValueError):
    pass


def evaluate_placement(x: PlacementDecision, catalog: ServiceCatalog, workload: WorkloadSpec,
                       alloc: Optional[CacheAllocation] = None,
                       options: SolverOptions = SolverOptions()) -> float:
    """Total response time of decision ``x``.

    Without ``alloc`` no cache is deployed and every item fetch goes to the
    origin server.

    Raises
    ------
    InfeasibleDecisionError
        If ``x`` uses a node that does not provision the job.
    SolverConvergenceError
        Propagated from the layered solver.
    """
    model = build_edge_model(catalog, x, workload)
    if alloc is not None:
        model = apply_cache_allocation(model, alloc, workload)
    return total_response_time(solve_lqn(model, options))


class Evaluator:
    """Memoized objective for one catalog and workload.

    Decisions whose solve fails to converge score ``inf`` so a search can
    move past them; ``failures`` counts them.
    """

    def __init__(self, catalog: ServiceCatalog, workload: WorkloadSpec, options: SolverOptions = SolverOptions()):
        self.catalog = catalog
        self.workload = workload
        self.options = options
        self.memo: dict = {}
        self.failures = 0

    def __call__(self, x: PlacementDecision, alloc: Optional[CacheAllocation] = None) -> float:
        key = (x.assign, None if alloc is None else alloc.slots)
        if key not in self.memo:
            try:
                self.memo[key] = evaluate_placement(x, self.catalog, self.workload, alloc, self.options)
            except SolverConvergenceError:
                self.failures += 1
                self.memo[key] = float("inf")
        return self.memo[key]

    @property
    def evaluations(self) -> int:
        return len(self.memo)


def _feasible_sets(catalog: ServiceCatalog) -> list[list[int]]:
    return [sorted(feasible_nodes(catalog, k)) for k in range(catalog.K)]


def _better(r: float, best: float) -> bool:
    return r < best - TIE_RTOL * abs(best)


def exhaustive_placement_oracle(catalog: ServiceCatalog, workload: WorkloadSpec,
                                limit: int = DEFAULT_ORACLE_LIMIT, alloc: Optional[CacheAllocation] = None,
                                options: SolverOptions = SolverOptions()) -> tuple[PlacementDecision, float]:
    """Optimal placement by enumeration; among ties the lexicographically
    smallest assignment wins.

    Raises
    ------
    InstanceTooLargeError
        If the number of feasible decisions exceeds ``limit``.
    """
    sets = _feasible_sets(catalog)
    size = int(np.prod([len(s) for s in sets], dtype=float))
    if size > limit:
        raise InstanceTooLargeError(f"{size} feasible decisions exceed the limit of {limit}")
    best, best_r = None, float("inf")
    for assign in itertools.product(*sets):
        x = PlacementDecision(tuple(assign), catalog.M)
        r = evaluate_placement(x, catalog, workload, alloc, options)
        if best is None or _better(r, best_r):
            best, best_r = x, r
    return best, best_r


def _compositions(total: int, parts: int):
    """All ways to write ``total`` as an ordered sum of ``parts`` naturals."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def exhaustive_jcsp_oracle(catalog: ServiceCatalog, workload: WorkloadSpec, capacities=None,
                           limit: int = DEFAULT_ORACLE_LIMIT,
                           options: SolverOptions = SolverOptions()) -> tuple[PlacementDecision, CacheAllocation, float]:
    """Joint optimum over placements and every split of each node's slots
    among the services placed on it (unplaced services get nothing; a node
    with no caching service keeps its slots on service 0)."""
    caps = tuple(workload.node_slots() if capacities is None else capacities)
    C = len(workload.services)
    sids = workload.service_ids
    candidates = []
    for assign in itertools.product(*_feasible_sets(catalog)):
        x = PlacementDecision(tuple(assign), catalog.M)
        per_node = []
        for m in range(catalog.M):
            cached = sorted(c for c in x.services_on(catalog, m) if workload.catalog_of(sids[c]) is not None)
            rows = []
            for split in (_compositions(caps[m], len(cached)) if cached else [()]):
                row = [0] * C
                for c, a in zip(cached, split):
                    row[c] = a
                if not cached:
                    row[0] = caps[m]
                rows.append(tuple(row))
            per_node.append(rows)
        for slots in itertools.product(*per_node):
            candidates.append((x, slots))
            if len(candidates) > limit:
                raise InstanceTooLargeError(f"more than {limit} joint decisions")
    best = None
    for x, slots in candidates:
        alloc = CacheAllocation(tuple(slots), caps)
        r = evaluate_placement(x, catalog, workload, alloc, options)
        if best is None or _better(r, best[2]):
            best = (x, alloc, r)
    return best


def memory_used_mb(catalog: ServiceCatalog, x: PlacementDecision, alloc: Optional[CacheAllocation],
                   workload: WorkloadSpec) -> float:
    return 0.0 if alloc is None else allocation_memory_mb(catalog, x, alloc, workload)
