"""JSON model documents (``schema: "jcsp-lqn/1"``)."""
from __future__ import annotations

import json
from typing import Any

from .types import (
    Activity,
    CacheConfig,
    CacheList,
    Call,
    Entry,
    LqnModel,
    PhaseType,
    Popularity,
    PrecedenceEdge,
    Processor,
    Task,
)

SCHEMA = "jcsp-lqn/1"


class ModelError(ValueError):
    """Raised for unreadable or invalid model documents.

    ``diagnostics`` holds one ``Diagnostic`` (or location string) per problem.
    """

    def __init__(self, message: str, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class _Reader:
    def __init__(self, doc: dict):
        self.doc = doc

    def req(self, obj: dict, key: str, path: str):
        if not isinstance(obj, dict):
            raise ModelError(f"{path}: expected an object")
        if key not in obj:
            raise ModelError(f"{path}.{key}: missing required field")
        return obj[key]

    def items(self, key: str) -> list:
        val = self.doc.get(key, [])
        if not isinstance(val, list):
            raise ModelError(f"{key}: expected an array")
        return val


def _popularity_from(obj: Any, path: str) -> Popularity:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ModelError(f"{path}: popularity needs a 'kind'")
    if obj["kind"] == "zipf":
        return Popularity.zipf(float(obj.get("eta", 0.0)))
    if obj["kind"] == "custom":
        return Popularity.custom(obj["weights"])
    raise ModelError(f"{path}.kind: unknown popularity kind {obj['kind']!r}")


def _popularity_to(pop: Popularity) -> dict:
    if pop.kind == "zipf":
        return {"kind": "zipf", "eta": pop.eta}
    return {"kind": "custom", "weights": list(pop.weights)}


def _demand_from(obj: Any, path: str) -> PhaseType:
    if isinstance(obj, (int, float)):
        return PhaseType.exponential(float(obj))
    if not isinstance(obj, dict):
        raise ModelError(f"{path}: expected a distribution object")
    kind = obj.get("kind", "exponential")
    scv = obj.get("scv")
    if scv is None:
        scv = {"exponential": 1.0, "erlang": 0.5, "hyper-exponential": 4.0}.get(kind, 1.0)
    return PhaseType(kind, float(obj.get("mean", 0.0)), float(scv))


def _cache_from(obj: Any, path: str) -> CacheConfig:
    if not isinstance(obj, dict):
        raise ModelError(f"{path}: expected an object")
    if "items" not in obj:
        raise ModelError(f"{path}.items: missing required field")
    lists = obj.get("lists", [{"capacity": 1, "parent": 0}])
    access = obj.get("access")
    return CacheConfig(
        items=int(obj["items"]),
        lists=tuple(CacheList(int(l["capacity"]), int(l.get("parent", 0))) for l in lists),
        popularity=_popularity_from(obj.get("popularity", {"kind": "zipf", "eta": 0.0}), f"{path}.popularity"),
        replacement=obj.get("replacement", "rr"),
        access=None if access is None else tuple((int(a["from"]), int(a["to"]), float(a["prob"])) for a in access),
        no_insert=float(obj.get("no-insert", 0.0)),
    )


def _cache_to(cfg: CacheConfig) -> dict:
    out = {
        "items": cfg.items,
        "lists": [{"capacity": l.capacity, "parent": l.parent} for l in cfg.lists],
        "popularity": _popularity_to(cfg.popularity),
        "replacement": cfg.replacement,
    }
    if cfg.access is not None:
        out["access"] = [{"from": i, "to": j, "prob": p} for i, j, p in cfg.access]
    if cfg.no_insert:
        out["no-insert"] = cfg.no_insert
    return out


def model_from_dict(doc: dict, validate: bool = True) -> LqnModel:
    if not isinstance(doc, dict):
        raise ModelError("document root must be an object")
    if doc.get("schema") != SCHEMA:
        raise ModelError(f"schema: expected {SCHEMA!r}, got {doc.get('schema')!r}")
    r = _Reader(doc)
    procs, tasks, entries, acts, precs, calls = [], [], [], [], [], []
    for i, p in enumerate(r.items("processors")):
        path = f"processors[{i}]"
        procs.append(
            Processor(
                str(r.req(p, "id", path)),
                p.get("scheduling", "processor-sharing"),
                int(p.get("multiplicity", 1)),
                bool(p.get("is-pseudo", False)),
            )
        )
    for i, t in enumerate(r.items("tasks")):
        path = f"tasks[{i}]"
        cache = t.get("cache-spec")
        tasks.append(
            Task(
                str(r.req(t, "id", path)),
                str(r.req(t, "host-processor", path)),
                int(t.get("multiplicity", 1)),
                t.get("kind", "ordinary"),
                None if cache is None else _cache_from(cache, f"{path}.cache-spec"),
            )
        )
    for i, e in enumerate(r.items("entries")):
        path = f"entries[{i}]"
        pop = e.get("popularity")
        entries.append(
            Entry(
                str(r.req(e, "id", path)),
                str(r.req(e, "owner-task", path)),
                str(r.req(e, "bound-activity", path)),
                e.get("kind", "ordinary"),
                None if pop is None else _popularity_from(pop, f"{path}.popularity"),
            )
        )
    for i, a in enumerate(r.items("activities")):
        path = f"activities[{i}]"
        acts.append(
            Activity(
                str(r.req(a, "id", path)),
                str(r.req(a, "owner", path)),
                _demand_from(a.get("host-demand", 0.0), f"{path}.host-demand"),
                tuple(str(c) for c in a.get("calls-out", [])),
            )
        )
    for i, pr in enumerate(r.items("precedences")):
        path = f"precedences[{i}]"
        probs = pr.get("branch-probabilities")
        src, dst = r.req(pr, "from", path), r.req(pr, "to", path)
        precs.append(
            PrecedenceEdge(
                tuple(src) if isinstance(src, list) else (src,),
                tuple(dst) if isinstance(dst, list) else (dst,),
                pr.get("kind", "sequence"),
                None if probs is None else tuple(float(x) for x in probs),
            )
        )
    for i, c in enumerate(r.items("calls")):
        path = f"calls[{i}]"
        calls.append(
            Call(
                str(r.req(c, "id", path)),
                str(r.req(c, "from-activity", path)),
                str(r.req(c, "to-entry", path)),
                c.get("kind", "synchronous"),
                float(c.get("mean-calls", 1.0)),
            )
        )
    model = LqnModel(
        str(doc.get("name", "model")),
        tuple(procs),
        tuple(tasks),
        tuple(entries),
        tuple(acts),
        tuple(precs),
        tuple(calls),
    )
    if validate:
        from .validate import validate_model

        diags = validate_model(model)
        if diags:
            lines = "; ".join(str(d) for d in diags)
            raise ModelError(f"invalid model: {lines}", diags)
    return model


def model_to_dict(model: LqnModel) -> dict:
    def demand(d: PhaseType) -> dict:
        return {"kind": d.kind, "mean": d.mean, "scv": d.scv}

    tasks = []
    for t in model.tasks:
        row = {"id": t.id, "host-processor": t.host_processor, "multiplicity": t.multiplicity, "kind": t.kind}
        if t.cache_spec is not None:
            row["cache-spec"] = _cache_to(t.cache_spec)
        tasks.append(row)
    entries = []
    for e in model.entries:
        row = {"id": e.id, "owner-task": e.owner_task, "kind": e.kind, "bound-activity": e.bound_activity}
        if e.popularity is not None:
            row["popularity"] = _popularity_to(e.popularity)
        entries.append(row)
    precs = []
    for p in model.precedences:
        row = {"from": list(p.from_), "to": list(p.to), "kind": p.kind}
        if p.branch_probabilities is not None:
            row["branch-probabilities"] = list(p.branch_probabilities)
        precs.append(row)
    return {
        "schema": SCHEMA,
        "name": model.name,
        "processors": [
            {"id": p.id, "scheduling": p.scheduling, "multiplicity": p.multiplicity, "is-pseudo": p.is_pseudo}
            for p in model.processors
        ],
        "tasks": tasks,
        "entries": entries,
        "activities": [
            {"id": a.id, "owner": a.owner, "host-demand": demand(a.host_demand), "calls-out": list(a.calls_out)}
            for a in model.activities
        ],
        "precedences": precs,
        "calls": [
            {"id": c.id, "from-activity": c.from_activity, "to-entry": c.to_entry, "kind": c.kind,
             "mean-calls": c.mean_calls}
            for c in model.calls
        ],
    }


def load_model(text: str, validate: bool = True) -> LqnModel:
    """Parse a model document and return a validated :class:`LqnModel`.

    Raises
    ------
    ModelError
        On malformed JSON (message carries line and column), missing fields
        (message carries the field path) or invariant violations (the
        ``diagnostics`` attribute lists each one).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return model_from_dict(doc, validate=validate)
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed field: {exc}") from exc


def save_model(model: LqnModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def read_model(path) -> LqnModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def write_model(model: LqnModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(save_model(model))
