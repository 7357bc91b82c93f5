"""Deterministic scheduling baseline: jobs with fixed execution times are
given start times and nodes so that the total completion time is minimal.

The genome holds ``K`` start-time genes on a grid over the serial horizon
followed by ``K`` node genes. Decoding repairs a genome into a feasible
schedule: jobs are taken in order of their start genes (predecessors first)
and each starts at the earliest instant no earlier than its gene, its
predecessors' completions and its node becoming free. The repaired shift is
added to the fitness with weight ``penalty``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model.edge import PlacementDecision, ServiceCatalog, feasible_nodes
from .ga import GaParams, GaRun, run_ga

START_GRID = 64
DEFAULT_PENALTY = 1e-6


@dataclass
class Schedule:
    x: PlacementDecision
    starts: tuple[float, ...]
    finishes: tuple[float, ...]

    @property
    def completion(self) -> float:
        """Sum over jobs of their completion instants."""
        return float(sum(self.finishes))


@dataclass
class OdtscResult:
    schedule: Schedule
    run: Optional[GaRun] = None

    @property
    def x(self) -> PlacementDecision:
        return self.schedule.x

    @property
    def completion(self) -> float:
        return self.schedule.completion


def predecessors(catalog: ServiceCatalog) -> list[set[int]]:
    pred = [set() for _ in range(catalog.K)]
    for w in catalog.workflows:
        for a, b in zip(w.jobs, w.jobs[1:]):
            if a != b:
                pred[b].add(a)
    return pred


def _exec(catalog: ServiceCatalog, m: int, k: int) -> float:
    return float(catalog.times[m][k])


def list_schedule(catalog: ServiceCatalog, assign, desired, pred=None, rank=None) -> tuple[Schedule, float]:
    """Repair ``desired`` start times into a feasible schedule. Ready jobs
    are taken by ``rank`` (default: desired start, then index).

    Returns the schedule and the total amount by which starts were pushed
    later.

    Raises
    ------
    ValueError
        If the workflow precedences contain a cycle.
    """
    K = catalog.K
    pred = predecessors(catalog) if pred is None else pred
    starts = [0.0] * K
    finish = [None] * K
    free = [0.0] * catalog.M
    shift = 0.0
    todo = set(range(K))
    while todo:
        ready = [k for k in todo if all(finish[p] is not None for p in pred[k])]
        if not ready:
            raise ValueError("workflow precedences contain a cycle")
        k = min(ready, key=(lambda j: (desired[j], j)) if rank is None else rank.__getitem__)
        m = assign[k]
        t0 = max([desired[k], free[m]] + [finish[p] for p in pred[k]])
        shift += t0 - desired[k]
        starts[k] = t0
        finish[k] = t0 + _exec(catalog, m, k)
        free[m] = finish[k]
        todo.remove(k)
    return Schedule(PlacementDecision(tuple(int(m) for m in assign), catalog.M), tuple(starts), tuple(finish)), shift


def odtsc_style_baseline(catalog: ServiceCatalog, params: GaParams = GaParams(),
                         penalty: float = DEFAULT_PENALTY, grid: int = START_GRID) -> OdtscResult:
    """GA over start times and node assignments minimizing the sum of job
    completion times under deterministic execution times ``catalog.times``."""
    K = catalog.K
    pred = predecessors(catalog)
    horizon = sum(max(_exec(catalog, m, k) for m in feasible_nodes(catalog, k)) for k in range(K))
    step = horizon / grid if grid > 0 else 0.0
    choices = [list(range(grid + 1))] * K + [sorted(feasible_nodes(catalog, k)) for k in range(K)]

    def decode(g):
        return list_schedule(catalog, g[K:], [v * step for v in g[:K]], pred)

    def fitness(g):
        s, shift = decode(g)
        return s.completion + penalty * shift

    run = run_ga(choices, fitness, params, np.random.default_rng(params.seed))
    return OdtscResult(decode(run.best)[0], run)


def exhaustive_schedule_oracle(catalog: ServiceCatalog, limit: int = 100_000) -> Schedule:
    """Minimum total completion over every assignment and every
    precedence-respecting job order, each scheduled without idle insertion."""
    K = catalog.K
    pred = predecessors(catalog)
    sets = [sorted(feasible_nodes(catalog, k)) for k in range(K)]
    size = int(np.prod([len(s) for s in sets], dtype=float)) * int(np.prod(range(1, K + 1), dtype=float))
    if size > limit:
        raise ValueError(f"{size} candidate schedules exceed the limit of {limit}")
    best = None
    for order in itertools.permutations(range(K)):
        pos = {k: i for i, k in enumerate(order)}
        if any(pos[p] > pos[k] for k in range(K) for p in pred[k]):
            continue
        for assign in itertools.product(*sets):
            s, _ = list_schedule(catalog, assign, [0.0] * K, pred, pos)
            if best is None or s.completion < best.completion - 1e-12:
                best = s
    return best
