"""Structural validation of LQN models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .types import (
    CALL_KINDS,
    ENTRY_KINDS,
    PRECEDENCE_KINDS,
    SCHEDULING,
    TASK_KINDS,
    LqnModel,
)

TOL = 1e-9


@dataclass(frozen=True)
class Diagnostic:
    path: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: [{self.code}] {self.message}"


def parent_chains_ok(parents) -> bool:
    """True when every list's parent chain reaches list 0."""
    h = len(parents)
    for l in range(1, h + 1):
        cur = l
        for _ in range(h + 1):
            if cur == 0:
                break
            if not 1 <= cur <= h:
                return False
            cur = parents[cur - 1]
        if cur != 0:
            return False
    return True


def activity_task(model: LqnModel, activity_id: str):
    """Task owning an activity (owner may be an entry or a task id)."""
    owner = model.activity[activity_id].owner
    if owner in model.entry:
        return model.entry[owner].owner_task
    if owner in model.task:
        return owner
    return None


def task_call_edges(model: LqnModel) -> set[tuple[str, str]]:
    edges = set()
    for c in model.calls:
        if c.from_activity not in model.activity or c.to_entry not in model.entry:
            continue
        src = activity_task(model, c.from_activity)
        if src is not None:
            edges.add((src, model.entry[c.to_entry].owner_task))
    return edges


def _cycles(nodes: list[str], edges) -> list[list[str]]:
    """Strongly connected components that contain a cycle."""
    index = {n: i for i, n in enumerate(nodes)}
    pairs = [(index[a], index[b]) for a, b in edges if a in index and b in index]
    if not pairs:
        return []
    rows, cols = zip(*pairs)
    g = csr_matrix((np.ones(len(pairs)), (rows, cols)), shape=(len(nodes), len(nodes)))
    _, labels = connected_components(g, directed=True, connection="strong")
    loops = {a for a, b in pairs if a == b}
    out = []
    for lab in sorted(set(labels)):
        members = [n for n, l in zip(nodes, labels) if l == lab]
        if len(members) > 1 or index[members[0]] in loops:
            out.append(members)
    return out


def validate_model(model: LqnModel) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty means valid."""
    d: list[Diagnostic] = []

    def add(path, code, msg):
        d.append(Diagnostic(path, code, msg))

    for name, items in (
        ("processors", model.processors),
        ("tasks", model.tasks),
        ("entries", model.entries),
        ("activities", model.activities),
        ("calls", model.calls),
    ):
        seen = set()
        for i, it in enumerate(items):
            if it.id in seen:
                add(f"{name}[{i}]", "duplicate-id", f"id {it.id!r} is used twice")
            seen.add(it.id)

    for i, p in enumerate(model.processors):
        if p.scheduling not in SCHEDULING:
            add(f"processors[{i}]", "scheduling", f"unknown scheduling {p.scheduling!r}")
        if p.multiplicity < 1:
            add(f"processors[{i}]", "multiplicity", "multiplicity must be >= 1")

    called_tasks = {t for _, t in task_call_edges(model)}
    for i, t in enumerate(model.tasks):
        path = f"tasks[{i}]"
        if t.host_processor not in model.processor:
            add(path, "dangling-reference", f"host processor {t.host_processor!r} does not exist")
        if t.kind not in TASK_KINDS:
            add(path, "task-kind", f"unknown task kind {t.kind!r}")
        if t.multiplicity < 1:
            add(path, "multiplicity", "multiplicity must be >= 1")
        if (t.kind == "cache") != (t.cache_spec is not None):
            add(path, "cache-spec", "cache-spec must be present exactly when kind is 'cache'")
        if t.kind == "reference" and t.id in called_tasks:
            add(path, "reference-called", "reference tasks cannot receive calls")
        if t.cache_spec is not None:
            cfg = t.cache_spec
            if any(c < 1 for c in cfg.capacities):
                add(path, "cache-capacity", "list capacities must be positive")
            elif cfg.capacity > cfg.items:
                add(path, "cache-capacity", f"capacity {cfg.capacity} exceeds item count {cfg.items}")
            h = len(cfg.lists)
            if not parent_chains_ok(cfg.parents):
                add(path, "cache-topology", "list parent chains must terminate at list 0")
            if cfg.replacement != "rr":
                add(path, "cache-replacement", f"unsupported replacement policy {cfg.replacement!r}")

    for i, e in enumerate(model.entries):
        path = f"entries[{i}]"
        if e.owner_task not in model.task:
            add(path, "dangling-reference", f"owner task {e.owner_task!r} does not exist")
            continue
        if e.bound_activity not in model.activity:
            add(path, "dangling-reference", f"bound activity {e.bound_activity!r} does not exist")
        if e.kind not in ENTRY_KINDS:
            add(path, "entry-kind", f"unknown entry kind {e.kind!r}")
        owner = model.task[e.owner_task]
        if e.kind == "item" and owner.kind != "cache":
            add(path, "item-entry-host", "item entries are only allowed on cache tasks")
        if (e.kind == "item") != (e.popularity is not None):
            add(path, "popularity", "popularity must be present exactly when kind is 'item'")
        if e.popularity is not None and e.popularity.kind == "custom":
            w = np.asarray(e.popularity.weights, dtype=float)
            items = owner.cache_spec.items if owner.cache_spec is not None else len(w)
            if len(w) != items or np.any(w < 0) or abs(w.sum() - 1.0) > TOL:
                add(path, "popularity", "custom popularity must be a distribution over the cache items")
        elif e.popularity is not None and e.popularity.eta < 0:
            add(path, "popularity", "zipf parameter must be >= 0")

    for i, a in enumerate(model.activities):
        path = f"activities[{i}]"
        if a.owner not in model.entry and a.owner not in model.task:
            add(path, "dangling-reference", f"owner {a.owner!r} is neither an entry nor a task")
        errs = a.host_demand.consistency_errors()
        if errs:
            add(path, "host-demand", "; ".join(errs))
        for cid in a.calls_out:
            if cid not in model.call or model.call[cid].from_activity != a.id:
                add(path, "calls-out", f"call {cid!r} does not originate at this activity")

    for i, c in enumerate(model.calls):
        path = f"calls[{i}]"
        if c.from_activity not in model.activity:
            add(path, "dangling-reference", f"activity {c.from_activity!r} does not exist")
        elif c.id not in model.activity[c.from_activity].calls_out:
            add(path, "calls-out", f"activity {c.from_activity!r} does not list this call")
        if c.to_entry not in model.entry:
            add(path, "dangling-reference", f"entry {c.to_entry!r} does not exist")
        if c.kind not in CALL_KINDS:
            add(path, "call-kind", f"unknown call kind {c.kind!r}")
        if not c.mean_calls > 0:
            add(path, "mean-calls", "mean-calls must be > 0")

    for i, p in enumerate(model.precedences):
        path = f"precedences[{i}]"
        missing = [a for a in p.from_ + p.to if a not in model.activity]
        if missing:
            add(path, "dangling-reference", f"unknown activities {missing}")
            continue
        if p.kind not in PRECEDENCE_KINDS:
            add(path, "precedence-kind", f"unknown precedence kind {p.kind!r}")
        elif p.kind == "sequence" and len(p.to) != 1:
            add(path, "fork-unsupported", "and-fork is not supported; use or-branch")
        elif p.kind == "or-branch":
            probs = p.branch_probabilities
            if probs is None or len(probs) != len(p.to):
                add(path, "or-branch-probabilities", "one probability per successor is required")
            elif any(x < 0 for x in probs) or abs(sum(probs) - 1.0) > TOL:
                add(path, "or-branch-probabilities", f"probabilities sum to {sum(probs)!r}, not 1")
        elif p.kind == "cache-access":
            if len(p.to) != 2 or len(p.from_) != 1:
                add(path, "cache-access-arity", f"cache-access needs one source and exactly two successors (hit, miss), got {len(p.to)}")
            else:
                owner = model.activity[p.from_[0]].owner
                if owner not in model.entry or model.entry[owner].kind != "item":
                    add(path, "cache-access-context", "cache-access edges must originate under an item entry")

    if all(a.owner in model.entry or a.owner in model.task for a in model.activities):
        edges = [(a, b) for p in model.precedences for a in p.from_ for b in p.to
                 if a in model.activity and b in model.activity]
        for cyc in _cycles([a.id for a in model.activities], edges):
            add(f"activities[{cyc[0]}]", "activity-cycle", f"activity graph contains a cycle through {cyc}")

    task_edges = task_call_edges(model)
    for cyc in _cycles([t.id for t in model.tasks], task_edges):
        add(f"tasks[{cyc[0]}]", "layering-cycle", f"layering cycle between tasks {cyc}")

    refs = [t.id for t in model.tasks if t.kind == "reference"]
    if not refs:
        add("tasks", "no-reference-task", "the model has no reference task")
    else:
        reach = set(refs)
        frontier = list(refs)
        adj: dict[str, set[str]] = {}
        for a, b in task_edges:
            adj.setdefault(a, set()).add(b)
        while frontier:
            cur = frontier.pop()
            for nxt in adj.get(cur, ()):
                if nxt not in reach:
                    reach.add(nxt)
                    frontier.append(nxt)
        for i, t in enumerate(model.tasks):
            if t.id not in reach:
                add(f"tasks[{i}]", "unreachable-task", f"task {t.id!r} is not reached from any reference task")
    return d
