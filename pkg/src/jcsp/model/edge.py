"""Edge-system models: service catalogs, placement decisions and cache
allocations, and their translation into layered queueing models.

Node, job and service indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional

import numpy as np

from .types import (
    INF,
    PS,
    Activity,
    CacheConfig,
    CacheList,
    Call,
    Entry,
    LqnModel,
    ModelBuilder,
    PhaseType,
    PrecedenceEdge,
    Processor,
    Task,
)

if TYPE_CHECKING:
    from ..workload.spec import WorkloadSpec


class InfeasibleDecisionError(ValueError):
    pass


class EmptyFeasibleSetError(ValueError):
    pass


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class Workflow:
    """A chain of job indices requested with ``probability`` by the users of
    ``group``."""

    jobs: tuple[int, ...]
    probability: float = 1.0
    group: int = 0


@dataclass(frozen=True)
class ServiceCatalog:
    """Which node provisions which job (``placement[m, k]``), the mean
    service time of job ``k`` at node ``m`` (``times[m, k]``), the service
    each job requests and the user workflows."""

    placement: tuple[tuple[int, ...], ...]
    times: tuple[tuple[float, ...], ...]
    job_service: tuple[int, ...]
    workflows: tuple[Workflow, ...]
    distribution: str = "exponential"
    scv: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.placement)
        t = np.asarray(self.times, dtype=float)
        if p.ndim != 2 or p.shape != t.shape:
            raise ValueError("placement and times must be M x K matrices of the same shape")
        if not np.isin(p, (0, 1)).all() or np.any(t < 0):
            raise ValueError("placement must be binary and times nonnegative")
        if len(self.job_service) != p.shape[1]:
            raise ValueError("job_service needs one service index per job")
        for k in range(p.shape[1]):
            if not p[:, k].any():
                raise EmptyFeasibleSetError(f"no node provisions job {k}")
        for w in self.workflows:
            if not w.jobs or any(not 0 <= k < p.shape[1] for k in w.jobs):
                raise ValueError(f"workflow {w} refers to unknown jobs")

    @property
    def M(self) -> int:
        return len(self.placement)

    @property
    def K(self) -> int:
        return len(self.placement[0])

    @property
    def C(self) -> int:
        return max(self.job_service) + 1

    def demand(self, m: int, k: int) -> PhaseType:
        t = self.times[m][k]
        if self.distribution == "hyper-exponential":
            return PhaseType.hyperexp(t, self.scv)
        if self.distribution == "erlang":
            return PhaseType("erlang", t, self.scv)
        return PhaseType.exponential(t)


def feasible_nodes(catalog: ServiceCatalog, k: int) -> frozenset[int]:
    """Nodes that provision job ``k``."""
    if not 0 <= k < catalog.K:
        raise IndexError(f"job index {k} out of range")
    nodes = frozenset(m for m in range(catalog.M) if catalog.placement[m][k])
    if not nodes:
        raise EmptyFeasibleSetError(f"no node provisions job {k}")
    return nodes


@dataclass(frozen=True)
class PlacementDecision:
    """Assignment of every job to one node, stored as ``assign[k] = m``."""

    assign: tuple[int, ...]
    M: int

    @classmethod
    def from_matrix(cls, x) -> "PlacementDecision":
        x = np.asarray(x)
        if x.ndim != 2 or not np.isin(x, (0, 1)).all():
            raise InfeasibleDecisionError("x must be a binary M x K matrix")
        if not np.all(x.sum(axis=0) == 1):
            raise InfeasibleDecisionError("every job must be assigned to exactly one node")
        return cls(tuple(int(i) for i in x.argmax(axis=0)), x.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        x = np.zeros((self.M, len(self.assign)), dtype=int)
        x[list(self.assign), np.arange(len(self.assign))] = 1
        return x

    @property
    def vector(self) -> np.ndarray:
        """``[x_11, ..., x_1K, x_21, ..., x_MK]``."""
        return self.matrix.reshape(-1)

    def check(self, catalog: ServiceCatalog) -> None:
        if self.M != catalog.M or len(self.assign) != catalog.K:
            raise InfeasibleDecisionError("decision shape does not match the catalog")
        for k, m in enumerate(self.assign):
            if not 0 <= m < catalog.M or not catalog.placement[m][k]:
                raise InfeasibleDecisionError(f"job {k} assigned to node {m}, which does not provision it")

    def services_on(self, catalog: ServiceCatalog, m: int) -> set[int]:
        return {catalog.job_service[k] for k, n in enumerate(self.assign) if n == m}


@dataclass(frozen=True)
class CacheAllocation:
    """Item slots per node and service; each row sums to the node capacity."""

    slots: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...]

    def __post_init__(self):
        if len(self.slots) != len(self.capacities):
            raise AllocationError("one allocation row per node is required")
        for m, (row, q) in enumerate(zip(self.slots, self.capacities)):
            if any(int(a) != a or a < 0 for a in row):
                raise AllocationError(f"node {m}: allocations must be nonnegative integers")
            if sum(row) != q:
                raise AllocationError(f"node {m}: allocations sum to {sum(row)}, capacity is {q}")

    @classmethod
    def from_weights(cls, weights, capacities) -> "CacheAllocation":
        """Largest-remainder rounding of nonnegative weights to each node's
        capacity; an all-zero row is split evenly."""
        rows = []
        for w, q in zip(np.asarray(weights, dtype=float), capacities):
            rows.append(tuple(largest_remainder(w, int(q))))
        return cls(tuple(rows), tuple(int(q) for q in capacities))


def largest_remainder(weights, total: int) -> list[int]:
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    if w.sum() <= 0:
        w = np.ones(len(w))
    share = w / w.sum() * total
    base = np.floor(share).astype(int)
    left = total - int(base.sum())
    # stable order keeps the rounding deterministic under ties
    order = np.argsort(-(share - base), kind="stable")
    base[order[:left]] += 1
    return [int(b) for b in base]


# -- documents --------------------------------------------------------------
CATALOG_SCHEMA = "jcsp-catalog/1"
DECISION_SCHEMA = "jcsp-decision/1"


def catalog_to_dict(catalog: ServiceCatalog) -> dict:
    return {
        "schema": CATALOG_SCHEMA,
        "placement": [list(r) for r in catalog.placement],
        "times": [list(r) for r in catalog.times],
        "job-service": list(catalog.job_service),
        "workflows": [{"jobs": list(w.jobs), "probability": w.probability, "group": w.group}
                      for w in catalog.workflows],
        "distribution": catalog.distribution,
        "scv": catalog.scv,
    }


def catalog_from_dict(doc: dict) -> ServiceCatalog:
    if doc.get("schema") != CATALOG_SCHEMA:
        raise ValueError(f"expected schema {CATALOG_SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        flows = tuple(Workflow(tuple(int(k) for k in w["jobs"]), float(w.get("probability", 1.0)),
                               int(w.get("group", 0))) for w in doc["workflows"])
        return ServiceCatalog(tuple(tuple(int(v) for v in r) for r in doc["placement"]),
                              tuple(tuple(float(v) for v in r) for r in doc["times"]),
                              tuple(int(c) for c in doc["job-service"]), flows,
                              doc.get("distribution", "exponential"), float(doc.get("scv", 1.0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed catalog document: {exc}") from exc


def decision_to_dict(x: PlacementDecision, alloc: Optional[CacheAllocation] = None) -> dict:
    doc = {"schema": DECISION_SCHEMA, "nodes": x.M, "assign": list(x.assign), "x": x.vector.tolist()}
    if alloc is not None:
        doc["allocation"] = {"slots": [list(r) for r in alloc.slots], "capacities": list(alloc.capacities)}
    return doc


def decision_from_dict(doc: dict) -> tuple[PlacementDecision, Optional[CacheAllocation]]:
    if doc.get("schema") != DECISION_SCHEMA:
        raise ValueError(f"expected schema {DECISION_SCHEMA!r}, got {doc.get('schema')!r}")
    x = PlacementDecision(tuple(int(m) for m in doc["assign"]), int(doc["nodes"]))
    a = doc.get("allocation")
    alloc = None if a is None else CacheAllocation(tuple(tuple(int(v) for v in r) for r in a["slots"]),
                                                   tuple(int(q) for q in a["capacities"]))
    return x, alloc


# -- model construction -----------------------------------------------------
def node_id(m: int) -> str:
    return f"node{m}"


def task_id(m: int, sid: str) -> str:
    return f"T{m}_{sid}"


def job_entry(m: int, k: int) -> str:
    return f"E{m}_{k}"


def origin_entry(sid: str) -> str:
    return f"origin_{sid}"


def cache_task_id(m: int, sid: str) -> str:
    return f"C{m}_{sid}"


def item_entry(m: int, sid: str) -> str:
    return f"I{m}_{sid}"


def build_edge_model(catalog: ServiceCatalog, x: PlacementDecision, workload: WorkloadSpec,
                     name: str = "edge") -> LqnModel:
    """One processor-sharing processor per node, one FCFS task per placed
    service, one entry per job, and a reference task per user group whose
    activity graph picks a workflow and calls the jobs in chain order.

    Services with an item catalog first fetch their content from the origin
    server (a pure delay); ``apply_cache_allocation`` inserts caches.

    Raises
    ------
    InfeasibleDecisionError
        If ``x`` assigns a job to a node that does not provision it.
    """
    x.check(catalog)
    sids = workload.service_ids
    if catalog.C > len(sids):
        raise ValueError("catalog uses more services than the workload declares")
    b = ModelBuilder(name)
    b.processor("P0", INF, is_pseudo=True)
    b.processor("Pcloud", INF, is_pseudo=True)
    for m in range(catalog.M):
        b.processor(node_id(m), PS, 1)

    N = workload.users
    used = sorted({catalog.job_service[k] for k in range(catalog.K)})
    fetch = [c for c in used if workload.catalog_of(sids[c]) is not None]
    if fetch:
        b.task("origin", "Pcloud", N)
        for c in fetch:
            a = b.activity(f"origin_{sids[c]}_a", origin_entry(sids[c]), workload.miss_delay(sids[c]))
            b.entry(origin_entry(sids[c]), "origin", a)

    placed = sorted({(m, catalog.job_service[k]) for k, m in enumerate(x.assign)})
    for m, c in placed:
        b.task(task_id(m, sids[c]), node_id(m), 1)
    for k, m in enumerate(x.assign):
        c = catalog.job_service[k]
        e = job_entry(m, k)
        work = b.activity(f"A{m}_{k}", e, catalog.demand(m, k))
        if c in fetch:
            f = b.activity(f"F{m}_{k}", e, 0.0)
            b.call(f, origin_entry(sids[c]))
            b.sequence(f, work)
            b.entry(e, task_id(m, sids[c]), f)
        else:
            b.entry(e, task_id(m, sids[c]), work)

    for g, grp in enumerate(workload.groups):
        flows = [w for w in catalog.workflows if w.group == g and w.probability > 0]
        if not flows:
            raise ValueError(f"user group {g} has no workflow")
        ref = f"users{g}"
        b.task(ref, "P0", grp.count, "reference")
        think = b.activity(f"think{g}", ref, workload.think_time)
        b.entry(f"{ref}_e", ref, think)
        heads = []
        for i, w in enumerate(flows):
            chain = []
            for pos, k in enumerate(w.jobs):
                a = b.activity(f"w{g}_{i}_{pos}", ref, 0.0)
                b.call(a, job_entry(x.assign[k], k))
                chain.append(a)
            b.sequence(*chain)
            heads.append(chain[0])
        total = sum(w.probability for w in flows)
        if len(heads) == 1:
            b.sequence(think, heads[0])
        else:
            probs = [w.probability / total for w in flows]
            probs[-1] = 1.0 - sum(probs[:-1])
            b.or_branch(think, heads, probs)
    return b.build()


def apply_cache_allocation(model: LqnModel, alloc: Optional[CacheAllocation], workload: WorkloadSpec,
                           prefetch_all: bool = False) -> LqnModel:
    """Insert a cache-task for every (node, service) with a positive
    allocation. The fetch activity then calls the cache's item entry, whose
    miss branch calls the origin server. Capacities above the item count are
    capped at the item count. ``prefetch_all`` ignores ``alloc`` and gives
    every fetching service a cache holding all of its items.
    """
    sids = workload.service_ids
    nodes = {p.id: int(p.id[4:]) for p in model.processors if p.id.startswith("node")}
    origin = {origin_entry(s): s for s in sids}
    if not prefetch_all and len(alloc.slots) != len(nodes):
        raise AllocationError(f"allocation has {len(alloc.slots)} rows for {len(nodes)} nodes")
    N = sum(t.multiplicity for t in model.reference_tasks)

    processors = list(model.processors)
    tasks = list(model.tasks)
    entries = list(model.entries)
    activities = {a.id: a for a in model.activities}
    precedences = list(model.precedences)
    calls = []
    added: set[tuple[int, str]] = set()
    for call in model.calls:
        sid = origin.get(call.to_entry)
        act = model.activity[call.from_activity]
        owner = model.entry.get(act.owner)
        if sid is None or owner is None:
            calls.append(call)
            continue
        m = nodes[model.task[owner.owner_task].host_processor]
        it = workload.catalog_of(sid)
        cap = it.count if prefetch_all else min(alloc.slots[m][sids.index(sid)], it.count)
        if cap <= 0:
            calls.append(call)
            continue
        ie = item_entry(m, sid)
        if (m, sid) not in added:
            added.add((m, sid))
            if not any(p.id == "Pcache" for p in processors):
                processors.append(Processor("Pcache", INF, 1, True))
            ct = cache_task_id(m, sid)
            tasks.append(Task(ct, "Pcache", N, "cache", CacheConfig(it.count, (CacheList(cap, 0),), it.popularity)))
            acc, hit, miss = f"{ie}_acc", f"{ie}_hit", f"{ie}_miss"
            activities[acc] = Activity(acc, ie)
            activities[hit] = Activity(hit, ie, PhaseType.exponential(workload.hit_delay(sid)))
            mcall = Call(f"{miss}->{call.to_entry}", miss, call.to_entry)
            activities[miss] = Activity(miss, ie, PhaseType(), (mcall.id,))
            calls.append(mcall)
            entries.append(Entry(ie, ct, acc, "item", it.popularity))
            precedences.append(PrecedenceEdge((acc,), (hit, miss), "cache-access"))
        new = replace(call, id=f"{call.from_activity}->{ie}", to_entry=ie)
        activities[act.id] = replace(act, calls_out=tuple(new.id if c == call.id else c for c in act.calls_out))
        calls.append(new)
    return LqnModel(model.name, tuple(processors), tuple(tasks), tuple(entries), tuple(activities.values()),
                    tuple(precedences), tuple(calls))


def allocation_memory_mb(catalog: ServiceCatalog, x: PlacementDecision, alloc: Optional[CacheAllocation],
                         workload: WorkloadSpec, prefetch_all: bool = False) -> float:
    """Memory held by the cache-tasks the allocation actually creates."""
    sids = workload.service_ids
    total = 0.0
    for m in range(catalog.M):
        for c in sorted(x.services_on(catalog, m)):
            it = workload.catalog_of(sids[c])
            if it is None:
                continue
            n = it.count if prefetch_all else min(alloc.slots[m][c], it.count)
            total += n * it.item_size_mb
    return total
