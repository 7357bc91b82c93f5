"""Reusable evaluation protocols: the two-layer caching validation model,
seed management, the scheduling-baseline gain study, analytic-versus-
simulated miss ratios and the cache-baseline comparison."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .metrics import ComparisonReport, ValidationReport, miss_ratio_report
from .model.edge import (
    CacheAllocation,
    PlacementDecision,
    ServiceCatalog,
    apply_cache_allocation,
    build_edge_model,
    feasible_nodes,
    largest_remainder,
)
from .model.types import INF, PS, CacheConfig, CacheList, LqnModel, ModelBuilder, Popularity
from .optimize.baselines import baseline_no_cache, baseline_prefetch_all
from .optimize.evaluate import evaluate_placement
from .optimize.ga import GaParams, JcspResult, ga_optimize_jcsp, ga_optimize_placement
from .optimize.odtsc import odtsc_style_baseline
from .sim.compare import ComparisonTable, compare_residence
from .sim.simulate import SimOptions, simulate
from .solver.caching import SolverOptions
from .solver.lqn import solve_lqn
from .workload.spec import WorkloadSpec
from .workload.synth import synth_catalog, synth_chain_instance, synth_workload

THREADS_ENV = "JCSP_THREADS"


def worker_count() -> int:
    """Worker cap from ``JCSP_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def sub_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 32-bit seeds spawned from one top-level seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def fan_out(fn: Callable, items: list, workers: Optional[int] = None) -> list:
    """``[fn(i) for i in items]``, run on up to ``workers`` processes.
    Results keep the input order, so the output does not depend on the
    worker count."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# -- two-layer caching validation model -------------------------------------
def validation_model(users: int, tokens: int, think: float = 1.0, hit: float = 0.2, miss: float = 0.5,
                     items: int = 3, capacity: int = 1) -> LqnModel:
    """Users cycling through a think time and one call to a single-list RR
    cache of ``capacity`` over ``items`` uniformly popular items, whose hit
    and miss activities run on a processor-sharing processor. ``tokens`` is
    the cache-task multiplicity."""
    b = ModelBuilder("validation")
    b.processor("P1", INF, is_pseudo=True)
    b.processor("Pc", PS, 1)
    b.task("RT1", "P1", users, "reference")
    b.task("CT", "Pc", tokens, "cache", CacheConfig(items, (CacheList(capacity, 0),), Popularity.uniform()))
    b.activity("think", "RT1", think)
    b.entry("RE", "RT1", "think")
    b.call("think", "items")
    b.activity("access", "items", 0.0)
    b.activity("hit", "items", hit)
    b.activity("miss", "items", miss)
    b.entry("items", "CT", "access", "item", Popularity.uniform())
    b.cache_access("access", "hit", "miss")
    return b.build()


@dataclass(frozen=True)
class ValidationPoint:
    users: int
    tokens: int
    analytical: float
    simulated: float
    half_width: float

    @property
    def rel_diff(self) -> float:
        return abs(self.analytical - self.simulated) / self.simulated


def _validation_point(job) -> ValidationPoint:
    users, tokens, solver, sim = job
    model = validation_model(users, tokens)
    table = compare_residence(solve_lqn(model, solver), simulate(model, sim), kinds=("entry",))
    row = table.row("items")
    return ValidationPoint(users, tokens, row.analytical, row.simulated, row.half_width)


def validation_grid(users=(1, 2, 3, 4), tokens=(1, 2, 3, 4), solver: SolverOptions = SolverOptions(),
                    sim: SimOptions = SimOptions(), workers: Optional[int] = None) -> list[ValidationPoint]:
    """Residence time of the cache entry, analytical against simulated, over
    every (users, tokens) pair."""
    jobs = [(u, t, solver, sim) for u in users for t in tokens]
    return fan_out(_validation_point, jobs, workers)


# -- scheduling baseline gain -------------------------------------------------
def _gain_pair(job) -> tuple[float, float]:
    seed, shape, params, solver = job
    catalog, workload = synth_chain_instance(**shape, seed=seed)
    p = GaParams(**{**params.__dict__, "seed": seed})
    proposed = ga_optimize_placement(catalog, workload, p, options=solver)
    sched = odtsc_style_baseline(catalog, p)
    return evaluate_placement(sched.x, catalog, workload, None, solver), proposed.R


def gain_study(seed: int = 0, instances: int = 30, shape: Optional[dict] = None,
               params: GaParams = GaParams(generations=200, patience=30),
               solver: SolverOptions = SolverOptions(), workers: Optional[int] = None) -> ComparisonReport:
    """Per instance, the response time of the deterministic-scheduling
    decision (baseline) against the stochastic-aware GA optimum.

    ``shape`` holds the ``M, N, C, K`` keywords of the chain instances
    (default two nodes, eight users, four services and four jobs).
    """
    shape = dict(M=2, N=8, C=4, K=4) if shape is None else dict(shape)
    jobs = [(s, shape, params, solver) for s in sub_seeds(seed, instances)]
    report = ComparisonReport("odtsc-schedule", "lqn-ga")
    for b, p in fan_out(_gain_pair, jobs, workers):
        report.add(b, p)
    return report


# -- analytic against simulated miss ratios ----------------------------------
def random_placement(catalog: ServiceCatalog, rng: np.random.Generator) -> PlacementDecision:
    return PlacementDecision(tuple(int(rng.choice(sorted(feasible_nodes(catalog, k)))) for k in range(catalog.K)),
                             catalog.M)


def even_allocation(catalog: ServiceCatalog, x: PlacementDecision, workload: WorkloadSpec) -> CacheAllocation:
    """Split each node's slots evenly over the services placed on it."""
    caps = workload.node_slots()
    C = len(workload.services)
    rows = []
    for m in range(catalog.M):
        on = sorted(x.services_on(catalog, m))
        row = [0] * C
        if on:
            for c, a in zip(on, largest_remainder(np.ones(len(on)), caps[m])):
                row[c] = a
        else:
            row[0] = caps[m]
        rows.append(tuple(row))
    return CacheAllocation(tuple(rows), caps)


def miss_ratio_instance(M: int, N: int, C: int, seed: int, q: float = 150.0, p: float = 0.1, eta: float = 1.0,
                        slots: int = 10) -> LqnModel:
    """Desk-scale edge model with a random placement and even cache split:
    ``slots`` item slots per node and catalogs of a few items each."""
    w = synth_workload(M, N, C, q=q, p=p, eta=eta, seed=seed, slots_per_node=slots)
    catalog = synth_catalog(w, seed=seed)
    x = random_placement(catalog, np.random.default_rng(seed))
    return apply_cache_allocation(build_edge_model(catalog, x, w), even_allocation(catalog, x, w), w)


DESK_GRID = ((2, 5, 4), (2, 10, 6), (3, 5, 6), (2, 15, 4), (3, 10, 4), (2, 5, 6))


def _miss_job(job) -> ValidationReport:
    i, (M, N, C), seed, solver, sim = job
    model = miss_ratio_instance(M, N, C, seed)
    s = simulate(model, SimOptions(**{**sim.__dict__, "seed": seed, "workers": 1}))
    return miss_ratio_report(model, solve_lqn(model, solver), s, i)


def miss_ratio_study(seed: int = 0, grid=DESK_GRID, solver: SolverOptions = SolverOptions(),
                     sim: SimOptions = SimOptions(events=40_000), workers: Optional[int] = None) -> ValidationReport:
    """Per-cache miss ratios of one model per ``(M, N, C)`` grid point."""
    jobs = [(i, g, s, solver, sim) for i, (g, s) in enumerate(zip(grid, sub_seeds(seed, len(grid))))]
    report = ValidationReport()
    for r in fan_out(_miss_job, jobs, workers):
        report.rows += r.rows
    return report


# -- cache baselines around a joint optimum -----------------------------------
@dataclass(frozen=True)
class BaselineComparison:
    jcsp: float
    no_cache: float
    prefetch_all: float
    jcsp_memory_mb: float
    prefetch_memory_mb: float

    @property
    def ordered(self) -> bool:
        """``R(prefetch-all) <= R(jcsp) <= R(no-cache)`` up to 1e-9 relative."""
        tol = 1e-9
        return (self.prefetch_all <= self.jcsp * (1 + tol)) and (self.jcsp <= self.no_cache * (1 + tol))

    @property
    def saves_memory(self) -> bool:
        return self.jcsp_memory_mb < self.prefetch_memory_mb

    def to_dict(self) -> dict:
        return {"jcsp": {"response-time": self.jcsp, "memory-mb": self.jcsp_memory_mb},
                "no-cache": {"response-time": self.no_cache, "memory-mb": 0.0},
                "prefetch-all": {"response-time": self.prefetch_all, "memory-mb": self.prefetch_memory_mb},
                "ordered": self.ordered, "saves-memory": self.saves_memory}


def compare_baselines(catalog: ServiceCatalog, workload: WorkloadSpec, result: JcspResult,
                      solver: SolverOptions = SolverOptions()) -> BaselineComparison:
    """No-cache and prefetch-all response times at the joint optimum's
    placement, next to the optimum itself."""
    rp, mem = baseline_prefetch_all(catalog, workload, result.x, solver)
    return BaselineComparison(result.R, baseline_no_cache(catalog, workload, result.x, solver), rp,
                              result.memory_mb, mem)


def _ordering_job(job) -> BaselineComparison:
    (M, N, C), seed, params, solver = job
    w = synth_workload(M, N, C, seed=seed)
    catalog = synth_catalog(w, seed=seed)
    res = ga_optimize_jcsp(catalog, w, params=GaParams(**{**params.__dict__, "seed": seed}), options=solver)
    return compare_baselines(catalog, w, res, solver)


def baseline_study(points, seed: int = 0, params: GaParams = GaParams(generations=20, patience=5),
                   solver: SolverOptions = SolverOptions(), workers: Optional[int] = None) -> list[BaselineComparison]:
    """Joint optimum against both cache baselines on one synthetic instance
    per ``(M, N, C)`` point."""
    points = list(points)
    jobs = [(pt, s, params, solver) for pt, s in zip(points, sub_seeds(seed, len(points)))]
    return fan_out(_ordering_job, jobs, workers)
