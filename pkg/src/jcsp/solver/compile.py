"""Reduce activity graphs to per-branch demand and call profiles.

Every entry (and every reference task body) is summarised by the expected
host demand and expected calls, split into three branches: common work,
work on the hit branch and work on the miss branch of a cache-access. The
expected value of any quantity is then ``w @ [1, p_hit, p_miss]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model.io import ModelError
from ..model.types import LqnModel

COMMON, HIT, MISS = 0, 1, 2


def branch_weights(p_hit: float) -> np.ndarray:
    return np.array([1.0, p_hit, 1.0 - p_hit])


@dataclass
class Profile:
    """Branch-split summary of one entry body.

    ``demand[b]`` is the expected host demand on ``processor`` and
    ``second[b]`` its expected second moment; ``calls`` maps
    ``(to_entry, kind)`` to expected calls per branch.
    """

    id: str
    task: str
    processor: str
    demand: np.ndarray = field(default_factory=lambda: np.zeros(3))
    second: np.ndarray = field(default_factory=lambda: np.zeros(3))
    calls: dict = field(default_factory=dict)
    cache_access: bool = False

    def mean_demand(self, p_hit: float = 0.0) -> float:
        return float(self.demand @ branch_weights(p_hit))


def _topological(acts: list[str], edges: list[tuple[str, str]]) -> list[str]:
    indeg = {a: 0 for a in acts}
    out: dict[str, list[str]] = {a: [] for a in acts}
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    order = [a for a in acts if indeg[a] == 0]
    i = 0
    while i < len(order):
        for b in out[order[i]]:
            indeg[b] -= 1
            if indeg[b] == 0:
                order.append(b)
        i += 1
    if len(order) != len(acts):
        raise ModelError("activity graph contains a cycle")
    return order


def _profile_from(model: LqnModel, pid: str, task_id: str, roots: list[str]) -> Profile:
    task = model.task[task_id]
    prof = Profile(pid, task_id, task.host_processor)
    reach: list[str] = []
    seen = set()
    stack = list(reversed(roots))
    while stack:
        a = stack.pop()
        if a in seen or a not in model.activity:
            continue
        seen.add(a)
        reach.append(a)
        for edge in model.successors(a):
            stack.extend(reversed(edge.to))
    edges = []
    weighted = []
    for a in reach:
        for edge in model.successors(a):
            if edge.kind == "or-branch":
                probs = edge.branch_probabilities
            else:
                probs = (1.0,) * len(edge.to)
            for j, b in enumerate(edge.to):
                edges.append((a, b))
                weighted.append((a, b, edge.kind, j, probs[j]))
    order = _topological(reach, edges)
    w = {a: np.zeros(3) for a in reach}
    for r in roots:
        if r in w:
            w[r][COMMON] += 1.0
    by_src: dict[str, list] = {}
    for item in weighted:
        by_src.setdefault(item[0], []).append(item)
    for a in order:
        wa = w[a]
        act = model.activity[a]
        d = act.host_demand
        prof.demand += wa * d.mean
        prof.second += wa * d.mean**2 * (1.0 + d.scv)
        for cid in act.calls_out:
            c = model.call[cid]
            key = (c.to_entry, c.kind)
            prof.calls[key] = prof.calls.get(key, np.zeros(3)) + wa * c.mean_calls
        for _, b, kind, j, p in by_src.get(a, ()):
            if kind == "cache-access":
                if wa[HIT] or wa[MISS]:
                    raise ModelError(f"activity {a!r}: nested cache-access branches are not supported")
                branch = HIT if j == 0 else MISS
                w[b][branch] += wa[COMMON]
                prof.cache_access = True
            else:
                w[b] += wa * p
    return prof


def compile_profiles(model: LqnModel) -> dict[str, Profile]:
    """Profiles keyed by entry id, plus one per reference task keyed by the
    task id describing one user cycle."""
    out = {}
    for e in model.entries:
        if model.task[e.owner_task].kind == "reference":
            continue
        out[e.id] = _profile_from(model, e.id, e.owner_task, [e.bound_activity])
    for t in model.reference_tasks:
        entries = model.entries_of(t.id)
        if entries:
            roots = [e.bound_activity for e in entries]
        else:
            targets = {b for p in model.precedences for b in p.to}
            roots = [a.id for a in model.activities if a.owner == t.id and a.id not in targets]
        prof = _profile_from(model, t.id, t.id, roots)
        if len(roots) > 1:
            # several entries on a reference task are visited with equal share
            prof.demand /= len(roots)
            prof.second /= len(roots)
            prof.calls = {k: v / len(roots) for k, v in prof.calls.items()}
        out[t.id] = prof
    return out
