"""Genetic search over placement decisions and joint cache allocations.

Operators: tournament selection, uniform crossover, per-gene reset mutation
and elitism. Genes are integers drawn from a per-gene list of allowed
values, so decoded individuals always satisfy the placement constraints.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..model.edge import (
    CacheAllocation,
    PlacementDecision,
    ServiceCatalog,
    allocation_memory_mb,
    feasible_nodes,
    largest_remainder,
)
from ..solver.caching import SolverOptions
from ..workload.spec import WorkloadSpec
from .evaluate import Evaluator

FITNESS_COLUMNS = ("generation", "best", "mean")
# capacity-split genes take values 0..WEIGHT_LEVELS
WEIGHT_LEVELS = 8


@dataclass(frozen=True)
class GaParams:
    """GA settings. ``mutation=None`` uses ``1 / genes``; ``patience`` stops a
    run after that many generations without improvement.
    ``replications`` and ``iterations`` size the comparison protocol."""

    generations: int = 1000
    population: int = 50
    crossover: float = 0.9
    mutation: Optional[float] = None
    tournament: int = 3
    elitism: int = 1
    replications: int = 30
    iterations: int = 30
    seed: int = 0
    patience: Optional[int] = None

    def __post_init__(self):
        if self.generations < 1 or self.population < 2:
            raise ValueError("need generations >= 1 and population >= 2")
        if not 0 <= self.crossover <= 1 or (self.mutation is not None and not 0 <= self.mutation <= 1):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if self.tournament < 1 or not 0 <= self.elitism < self.population:
            raise ValueError("need tournament >= 1 and 0 <= elitism < population")
        if self.replications < 1 or self.iterations < 1:
            raise ValueError("replications and iterations must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class GaRun:
    best: tuple
    fitness: float
    history: list = field(default_factory=list)   # (generation, best so far, mean)

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FITNESS_COLUMNS)
        for g, b, m in self.history:
            w.writerow([g, repr(b), repr(m)])
        return buf.getvalue()


def run_ga(choices: list, fitness: Callable[[tuple], float], params: GaParams,
           rng: np.random.Generator) -> GaRun:
    """Minimize ``fitness`` over genomes whose gene ``i`` is one of
    ``choices[i]``. Ties go to the lexicographically smallest genome."""
    n = len(choices)
    choices = [np.asarray(c) for c in choices]
    rate = params.mutation if params.mutation is not None else (1.0 / n if n else 0.0)

    def draw(i: int):
        return choices[i][rng.integers(len(choices[i]))].item()

    pop = [tuple(draw(i) for i in range(n)) for _ in range(params.population)]
    best, best_f = None, float("inf")
    history = []
    stale = 0
    for g in range(params.generations):
        f = np.array([fitness(ind) for ind in pop])
        order = sorted(range(len(pop)), key=lambda j: (f[j], pop[j]))
        top = order[0]
        if best is None or (f[top], pop[top]) < (best_f, best):
            stale = 0 if best is None or f[top] < best_f else stale + 1
            best, best_f = pop[top], float(f[top])
        else:
            stale += 1
        finite = f[np.isfinite(f)]
        history.append((g, best_f, float(finite.mean()) if finite.size else float("inf")))
        if g == params.generations - 1 or (params.patience is not None and stale >= params.patience):
            break
        nxt = [pop[j] for j in order[: params.elitism]]
        while len(nxt) < params.population:
            a, b = (min(rng.integers(len(pop), size=params.tournament), key=lambda j: (f[j], j)) for _ in range(2))
            child = list(pop[a])
            if rng.random() < params.crossover:
                mask = rng.random(n) < 0.5
                child = [pop[b][i] if mask[i] else child[i] for i in range(n)]
            for i in np.flatnonzero(rng.random(n) < rate):
                child[i] = draw(i)
            nxt.append(tuple(child))
        pop = nxt
    return GaRun(best, best_f, history)


@dataclass
class PlacementResult:
    x: PlacementDecision
    R: float
    run: GaRun
    evaluations: int
    failures: int = 0


@dataclass
class JcspResult:
    x: PlacementDecision
    alloc: CacheAllocation
    R: float
    memory_mb: float
    run: GaRun
    evaluations: int
    failures: int = 0


def ga_optimize_placement(catalog: ServiceCatalog, workload: WorkloadSpec, params: GaParams = GaParams(),
                          alloc: Optional[CacheAllocation] = None, options: SolverOptions = SolverOptions(),
                          evaluator: Optional[Evaluator] = None) -> PlacementResult:
    """Search job-to-node assignments for the minimum total response time.

    Each gene is the node of one job, drawn from its feasible set.
    """
    ev = evaluator or Evaluator(catalog, workload, options)
    choices = [sorted(feasible_nodes(catalog, k)) for k in range(catalog.K)]
    run = run_ga(choices, lambda g: ev(PlacementDecision(g, catalog.M), alloc), params,
                 np.random.default_rng(params.seed))
    return PlacementResult(PlacementDecision(run.best, catalog.M), run.fitness, run, ev.evaluations, ev.failures)


def decode_allocation(x: PlacementDecision, weights, catalog: ServiceCatalog, workload: WorkloadSpec,
                      capacities) -> CacheAllocation:
    """Split each node's slots over its placed caching services in
    proportion to ``weights[m]`` (largest remainder). Unplaced services get
    nothing; all-zero weights split evenly; a node without caching services
    parks its slots on service 0, where they create no cache."""
    sids = workload.service_ids
    C = len(sids)
    w = np.asarray(weights, dtype=float).reshape(catalog.M, C)
    rows = []
    for m in range(catalog.M):
        cached = sorted(c for c in x.services_on(catalog, m) if workload.catalog_of(sids[c]) is not None)
        row = [0] * C
        if cached:
            for c, a in zip(cached, largest_remainder(w[m, cached], int(capacities[m]))):
                row[c] = a
        else:
            row[0] = int(capacities[m])
        rows.append(tuple(row))
    return CacheAllocation(tuple(rows), tuple(int(q) for q in capacities))


def ga_optimize_jcsp(catalog: ServiceCatalog, workload: WorkloadSpec, capacities=None,
                     params: GaParams = GaParams(), options: SolverOptions = SolverOptions(),
                     evaluator: Optional[Evaluator] = None) -> JcspResult:
    """Joint search over placement and per-node cache splits.

    The genome is the ``K`` placement genes followed by ``M x C`` split
    weights in ``0..WEIGHT_LEVELS``, decoded by :func:`decode_allocation`.
    """
    caps = tuple(workload.node_slots() if capacities is None else capacities)
    if len(caps) != catalog.M or any(q <= 0 for q in caps):
        raise ValueError("need one positive capacity per node")
    ev = evaluator or Evaluator(catalog, workload, options)
    K, C = catalog.K, len(workload.services)
    levels = list(range(WEIGHT_LEVELS + 1))
    choices = [sorted(feasible_nodes(catalog, k)) for k in range(K)] + [levels] * (catalog.M * C)

    def decode(g):
        x = PlacementDecision(tuple(g[:K]), catalog.M)
        return x, decode_allocation(x, g[K:], catalog, workload, caps)

    run = run_ga(choices, lambda g: ev(*decode(g)), params, np.random.default_rng(params.seed))
    x, alloc = decode(run.best)
    mem = allocation_memory_mb(catalog, x, alloc, workload)
    return JcspResult(x, alloc, run.fitness, mem, run, ev.evaluations, ev.failures)
