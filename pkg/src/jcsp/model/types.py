"""Data model for layered queueing networks extended with cache-tasks.

All model values are frozen dataclasses holding tuples, so a model can be
shared read-only between solver and optimizer workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

PS = "processor-sharing"
INF = "infinite-server"
SCHEDULING = (PS, INF)

TASK_KINDS = ("ordinary", "reference", "cache")
ENTRY_KINDS = ("ordinary", "item")
PRECEDENCE_KINDS = ("sequence", "or-branch", "cache-access")
CALL_KINDS = ("synchronous", "asynchronous")
DIST_KINDS = ("exponential", "erlang", "hyper-exponential")

# used when a hyper-exponential demand is requested without an explicit scv
DEFAULT_HYPEREXP_SCV = 4.0


@dataclass(frozen=True)
class PhaseType:
    """Service demand distribution parameterised by mean and squared
    coefficient of variation.

    A zero mean is accepted and means "no demand". Erlang uses
    ``round(1/scv)`` phases; the hyper-exponential is the two-phase
    balanced-means fit.
    """

    kind: str = "exponential"
    mean: float = 0.0
    scv: float = 1.0

    @classmethod
    def exponential(cls, mean: float) -> "PhaseType":
        return cls("exponential", float(mean), 1.0)

    @classmethod
    def erlang(cls, mean: float, phases: int) -> "PhaseType":
        return cls("erlang", float(mean), 1.0 / int(phases))

    @classmethod
    def hyperexp(cls, mean: float, scv: float = DEFAULT_HYPEREXP_SCV) -> "PhaseType":
        return cls("hyper-exponential", float(mean), float(scv))

    @property
    def phases(self) -> int:
        if self.kind == "erlang":
            return max(1, int(round(1.0 / self.scv)))
        return 1

    def consistency_errors(self) -> list[str]:
        errs = []
        if self.kind not in DIST_KINDS:
            errs.append(f"unknown distribution kind {self.kind!r}")
        if not (self.mean >= 0.0 and math.isfinite(self.mean)):
            errs.append(f"mean must be a finite value >= 0, got {self.mean}")
        if self.kind == "exponential" and self.scv != 1.0:
            errs.append(f"exponential requires scv = 1, got {self.scv}")
        if self.kind == "erlang" and not (0.0 < self.scv <= 1.0):
            errs.append(f"erlang requires 0 < scv <= 1, got {self.scv}")
        if self.kind == "hyper-exponential" and not self.scv > 1.0:
            errs.append(f"hyper-exponential requires scv > 1, got {self.scv}")
        return errs

    def hyperexp_params(self) -> tuple[float, float, float]:
        """(p1, rate1, rate2) of the balanced-means two-phase fit."""
        p1 = 0.5 * (1.0 + math.sqrt((self.scv - 1.0) / (self.scv + 1.0)))
        return p1, 2.0 * p1 / self.mean, 2.0 * (1.0 - p1) / self.mean

    def sample(self, rng: np.random.Generator) -> float:
        if self.mean <= 0.0:
            return 0.0
        if self.kind == "exponential":
            return rng.exponential(self.mean)
        if self.kind == "erlang":
            k = self.phases
            return rng.gamma(k, self.mean / k)
        p1, r1, r2 = self.hyperexp_params()
        return rng.exponential(1.0 / r1) if rng.random() < p1 else rng.exponential(1.0 / r2)


@dataclass(frozen=True)
class Popularity:
    """Item popularity: ``zipf`` with skew ``eta`` or ``custom`` weights."""

    kind: str = "zipf"
    eta: float = 0.0
    weights: Optional[tuple[float, ...]] = None

    @classmethod
    def zipf(cls, eta: float) -> "Popularity":
        return cls("zipf", float(eta), None)

    @classmethod
    def uniform(cls) -> "Popularity":
        return cls("zipf", 0.0, None)

    @classmethod
    def custom(cls, weights) -> "Popularity":
        return cls("custom", 0.0, tuple(float(w) for w in weights))

    def probabilities(self, n: int) -> np.ndarray:
        if self.kind == "zipf":
            w = 1.0 / np.arange(1, n + 1, dtype=float) ** self.eta
        else:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != n:
                raise ValueError(f"custom popularity has {len(w)} weights for {n} items")
        return w / w.sum()


@dataclass(frozen=True)
class CacheList:
    capacity: int
    parent: int = 0


@dataclass(frozen=True)
class CacheConfig:
    """Structural cache properties carried by a cache-task.

    ``access`` optionally overrides the default access probabilities as
    ``(from_list, to_list, probability)`` triples; by default an item moves
    from ``p(j)`` to ``j`` with probability ``1 / #children(p(j))``.
    ``no_insert`` is the probability ``c(0, 0)`` that a miss leaves the
    cache untouched.
    """

    items: int
    lists: tuple[CacheList, ...] = (CacheList(1, 0),)
    popularity: Popularity = Popularity.uniform()
    replacement: str = "rr"
    access: Optional[tuple[tuple[int, int, float], ...]] = None
    no_insert: float = 0.0

    @property
    def capacities(self) -> tuple[int, ...]:
        return tuple(l.capacity for l in self.lists)

    @property
    def parents(self) -> tuple[int, ...]:
        return tuple(l.parent for l in self.lists)

    @property
    def capacity(self) -> int:
        return sum(self.capacities)

    def access_matrix(self) -> np.ndarray:
        h = len(self.lists)
        c = np.zeros((h + 1, h + 1))
        if self.access is not None:
            for i, j, p in self.access:
                c[i, j] = p
        else:
            parents = self.parents
            for j in range(1, h + 1):
                par = parents[j - 1]
                siblings = sum(1 for q in parents if q == par)
                c[par, j] = 1.0 / siblings
            if self.no_insert:
                c[0, 1:] *= 1.0 - self.no_insert
        c[0, 0] = self.no_insert
        return c


@dataclass(frozen=True)
class Processor:
    id: str
    scheduling: str = PS
    multiplicity: int = 1
    is_pseudo: bool = False

    @property
    def infinite(self) -> bool:
        return self.scheduling == INF


@dataclass(frozen=True)
class Task:
    id: str
    host_processor: str
    multiplicity: int = 1
    kind: str = "ordinary"
    cache_spec: Optional[CacheConfig] = None


@dataclass(frozen=True)
class Entry:
    id: str
    owner_task: str
    bound_activity: str
    kind: str = "ordinary"
    popularity: Optional[Popularity] = None


@dataclass(frozen=True)
class Activity:
    id: str
    owner: str
    host_demand: PhaseType = PhaseType()
    calls_out: tuple[str, ...] = ()


@dataclass(frozen=True)
class PrecedenceEdge:
    """Activity-graph edge.

    For ``cache-access`` edges ``to`` is ``(hit, miss)`` in that order.
    """

    from_: tuple[str, ...]
    to: tuple[str, ...]
    kind: str = "sequence"
    branch_probabilities: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class Call:
    id: str
    from_activity: str
    to_entry: str
    kind: str = "synchronous"
    mean_calls: float = 1.0


@dataclass(frozen=True)
class LqnModel:
    name: str
    processors: tuple[Processor, ...] = ()
    tasks: tuple[Task, ...] = ()
    entries: tuple[Entry, ...] = ()
    activities: tuple[Activity, ...] = ()
    precedences: tuple[PrecedenceEdge, ...] = ()
    calls: tuple[Call, ...] = ()

    @cached_property
    def processor(self) -> dict[str, Processor]:
        return {p.id: p for p in self.processors}

    @cached_property
    def task(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def entry(self) -> dict[str, Entry]:
        return {e.id: e for e in self.entries}

    @cached_property
    def activity(self) -> dict[str, Activity]:
        return {a.id: a for a in self.activities}

    @cached_property
    def call(self) -> dict[str, Call]:
        return {c.id: c for c in self.calls}

    @cached_property
    def reference_tasks(self) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if t.kind == "reference")

    @cached_property
    def cache_tasks(self) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if t.kind == "cache")

    def entries_of(self, task_id: str) -> list[Entry]:
        return [e for e in self.entries if e.owner_task == task_id]

    def tasks_on(self, proc_id: str) -> list[Task]:
        return [t for t in self.tasks if t.host_processor == proc_id]

    def successors(self, activity_id: str) -> list[PrecedenceEdge]:
        return self._succ.get(activity_id, [])

    @cached_property
    def _succ(self) -> dict[str, list[PrecedenceEdge]]:
        out: dict[str, list[PrecedenceEdge]] = {}
        for edge in self.precedences:
            for a in edge.from_:
                out.setdefault(a, []).append(edge)
        return out

    def calls_from(self, activity_id: str) -> list[Call]:
        return self._calls_by_activity.get(activity_id, [])

    @cached_property
    def _calls_by_activity(self) -> dict[str, list[Call]]:
        out: dict[str, list[Call]] = {}
        for c in self.calls:
            out.setdefault(c.from_activity, []).append(c)
        return out

    def task_of_entry(self, entry_id: str) -> Task:
        return self.task[self.entry[entry_id].owner_task]

    def entry_graph(self, entry_id: str) -> list[str]:
        """Activities reachable from the entry's bound activity, in DFS order."""
        seen: list[str] = []
        stack = [self.entry[entry_id].bound_activity]
        marked = set()
        while stack:
            a = stack.pop()
            if a in marked or a not in self.activity:
                continue
            marked.add(a)
            seen.append(a)
            for edge in self.successors(a):
                stack.extend(reversed(edge.to))
        return seen


@dataclass
class ModelBuilder:
    """Incremental construction helper; ``build()`` freezes the result."""

    name: str = "model"
    processors: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    entries: list = field(default_factory=list)
    activities: list = field(default_factory=list)
    precedences: list = field(default_factory=list)
    calls: list = field(default_factory=list)

    def processor(self, pid, scheduling=PS, multiplicity=1, is_pseudo=False):
        self.processors.append(Processor(pid, scheduling, int(multiplicity), bool(is_pseudo)))
        return pid

    def task(self, tid, processor, multiplicity=1, kind="ordinary", cache_spec=None):
        self.tasks.append(Task(tid, processor, int(multiplicity), kind, cache_spec))
        return tid

    def entry(self, eid, task, bound_activity, kind="ordinary", popularity=None):
        self.entries.append(Entry(eid, task, bound_activity, kind, popularity))
        return eid

    def activity(self, aid, owner, demand=0.0):
        if not isinstance(demand, PhaseType):
            demand = PhaseType.exponential(demand)
        self.activities.append(Activity(aid, owner, demand, ()))
        return aid

    def call(self, from_activity, to_entry, mean_calls=1.0, kind="synchronous"):
        cid = f"{from_activity}->{to_entry}"
        n = sum(1 for c in self.calls if c.id.startswith(cid))
        if n:
            cid = f"{cid}#{n}"
        self.calls.append(Call(cid, from_activity, to_entry, kind, float(mean_calls)))
        for i, a in enumerate(self.activities):
            if a.id == from_activity:
                self.activities[i] = Activity(a.id, a.owner, a.host_demand, a.calls_out + (cid,))
        return cid

    def sequence(self, *activity_ids):
        for a, b in zip(activity_ids, activity_ids[1:]):
            self.precedences.append(PrecedenceEdge((a,), (b,), "sequence"))

    def or_branch(self, source, targets, probabilities):
        self.precedences.append(
            PrecedenceEdge((source,), tuple(targets), "or-branch", tuple(float(p) for p in probabilities))
        )

    def cache_access(self, source, hit, miss):
        self.precedences.append(PrecedenceEdge((source,), (hit, miss), "cache-access"))

    def build(self) -> LqnModel:
        return LqnModel(
            self.name,
            tuple(self.processors),
            tuple(self.tasks),
            tuple(self.entries),
            tuple(self.activities),
            tuple(self.precedences),
            tuple(self.calls),
        )
