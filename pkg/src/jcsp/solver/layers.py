"""Decomposition of an LQN into per-depth queueing sub-models.

Tasks whose thread pool can never be exhausted (multiplicity at least the
total population that can call them) cause no queueing of their own; they
are inlined into their callers' chains. Every other task becomes a FCFS
multi-server station in the sub-model below its callers and a customer
class (population = multiplicity) in the sub-models below itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..model.io import ModelError
from ..model.types import LqnModel
from .compile import Profile, compile_profiles


@dataclass(frozen=True)
class Station:
    id: str
    kind: str          # "task" | "processor"
    queue: str         # "fcfs" | "ps" | "is"
    servers: int
    depth: int


@dataclass(frozen=True)
class SubModel:
    index: int
    depth: int
    stations: tuple[Station, ...]
    classes: tuple[str, ...]
    cache_tasks: tuple[str, ...] = ()

    @property
    def caching(self) -> bool:
        return bool(self.cache_tasks)

    @property
    def station_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.stations)


@dataclass
class LayerStructure:
    """Static layering facts shared by the solver sweeps."""

    model: LqnModel
    profiles: dict[str, Profile]
    populations: dict[str, int]              # class id -> customers
    callers: dict[str, frozenset]            # task -> client classes that reach it
    stations: dict[str, Station]
    submodels: list[SubModel]
    class_depth: dict[str, int]
    order: list[str] = field(default_factory=list)   # tasks, callers first

    def is_class(self, task_id: str) -> bool:
        return task_id in self.populations

    def executing_classes(self, task_id: str) -> frozenset:
        """Client classes whose customers run the task's entries."""
        if task_id in self.populations:
            return frozenset([task_id])
        return self.callers.get(task_id, frozenset())

    def executing_population(self, task_id: str) -> int:
        return sum(self.populations[c] for c in self.executing_classes(task_id))

    def submodel_of(self, station_id: str) -> SubModel:
        for sub in self.submodels:
            if station_id in sub.station_ids:
                return sub
        raise KeyError(station_id)


def _call_graph(model: LqnModel, profiles: dict[str, Profile]):
    sync: dict[str, set[str]] = {t.id: set() for t in model.tasks}
    for prof in profiles.values():
        for (to_entry, kind) in prof.calls:
            if kind == "synchronous":
                sync[prof.task].add(model.entry[to_entry].owner_task)
    return sync


def _task_order(model: LqnModel, sync: dict[str, set[str]]) -> list[str]:
    indeg = {t: 0 for t in sync}
    for a, outs in sync.items():
        for b in outs:
            indeg[b] += 1
    order = [t.id for t in model.tasks if indeg[t.id] == 0]
    i = 0
    while i < len(order):
        for b in sorted(sync[order[i]], key=[t.id for t in model.tasks].index):
            indeg[b] -= 1
            if indeg[b] == 0:
                order.append(b)
        i += 1
    if len(order) != len(sync):
        cyc = sorted(set(sync) - set(order))
        raise ModelError(f"layering cycle between tasks {cyc}")
    return order


def _components(stations: list[Station], visitors_of: dict) -> list[list[Station]]:
    parent = list(range(len(stations)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[str, int] = {}
    for i, st in enumerate(stations):
        for c in visitors_of[st.id]:
            if c in owner:
                parent[find(i)] = find(owner[c])
            else:
                owner[c] = i
    groups: dict[int, list[Station]] = {}
    for i, st in enumerate(stations):
        groups.setdefault(find(i), []).append(st)
    return list(groups.values())


def analyze_layers(model: LqnModel, profiles: dict[str, Profile] | None = None) -> LayerStructure:
    profiles = compile_profiles(model) if profiles is None else profiles
    sync = _call_graph(model, profiles)
    order = _task_order(model, sync)
    rev: dict[str, set[str]] = {t: set() for t in sync}
    for a, outs in sync.items():
        for b in outs:
            rev[b].add(a)

    pops: dict[str, int] = {}
    callers: dict[str, frozenset] = {}
    roots: dict[str, set] = {}
    depth: dict[str, int] = {}
    stations: dict[str, Station] = {}
    for tid in order:
        task = model.task[tid]
        roots[tid] = set()
        for u in rev[tid]:
            roots[tid] |= roots[u]
        if task.kind == "reference":
            pops[tid] = task.multiplicity
            depth[tid] = 0
            roots[tid] = {tid}
            continue
        cr: set[str] = set()
        for u in rev[tid]:
            cr |= {u} if u in pops else set(callers.get(u, ()))
        callers[tid] = frozenset(cr)
        # no more customers than the users that can reach the task
        pop = min(sum(pops[c] for c in cr), sum(pops[r] for r in roots[tid]))
        if pop and task.multiplicity < pop:
            pops[tid] = task.multiplicity
            d = 1 + max(depth[c] for c in cr)
            depth[tid] = d
            stations[tid] = Station(tid, "task", "fcfs", task.multiplicity, d)

    for proc in model.processors:
        hosted = model.tasks_on(proc.id)
        visitors: set[str] = set()
        for t in hosted:
            visitors |= set([t.id]) if t.id in pops else set(callers.get(t.id, ()))
        if not visitors:
            continue
        only_refs = all(t.kind == "reference" for t in hosted)
        if proc.is_pseudo or (proc.infinite and only_refs):
            continue
        pop = sum(pops[c] for c in visitors)
        if proc.infinite or proc.multiplicity >= pop:
            queue, servers = "is", 1
        else:
            queue, servers = "ps", proc.multiplicity
        d = 1 + max(depth[c] for c in visitors)
        stations[proc.id] = Station(proc.id, "processor", queue, servers, d)

    visitors_of: dict[str, set[str]] = {}
    for sid, st in stations.items():
        if st.kind == "task":
            visitors_of[sid] = set(callers[sid])
        else:
            v: set[str] = set()
            for t in model.tasks_on(sid):
                v |= {t.id} if t.id in pops else set(callers.get(t.id, ()))
            visitors_of[sid] = v

    task_rank = {t.id: i for i, t in enumerate(model.tasks)}
    model_rank = {p.id: i for i, p in enumerate(model.processors)}
    subs = []
    for d in sorted({s.depth for s in stations.values()}):
        sts = [s for s in stations.values() if s.depth == d]
        sts.sort(key=lambda s: (s.kind != "task", task_rank.get(s.id, model_rank.get(s.id, 0))))
        # stations that share no class do not interact: solve them apart
        for group in _components(sts, visitors_of):
            cls: set[str] = set()
            for s in group:
                cls |= visitors_of[s.id]
            subs.append(SubModel(len(subs), d, tuple(group), tuple(sorted(cls, key=task_rank.get))))

    struct = LayerStructure(model, profiles, pops, callers, stations, subs, depth, order)
    flagged: dict[int, list[str]] = {}
    for ct in model.cache_tasks:
        host = ct.host_processor
        if host in stations:
            idx = struct.submodel_of(host).index
        elif ct.id in stations:
            idx = struct.submodel_of(ct.id).index
        else:
            idx = 0
        flagged.setdefault(idx, []).append(ct.id)
    struct.submodels = [
        SubModel(s.index, s.depth, s.stations, s.classes, tuple(flagged.get(s.index, ()))) for s in subs
    ]
    if not struct.submodels and model.cache_tasks:
        raise ModelError("cache-tasks exist but no queueing station hosts them")
    return struct


def decompose_layers(model: LqnModel) -> list[SubModel]:
    """Sub-models in the order the solver visits them (shallowest first)."""
    return analyze_layers(model).submodels
