"""Discrete-event simulation of LQN models with random-replacement caches."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..model.types import LqnModel
from .engine import Engine, PsStation, SimulationError, ThreadPool

SIM_COLUMNS = ("entity", "class", "throughput", "residence-time", "queue-length", "utilization",
               "ci-half-width", "replications", "seed")


@dataclass(frozen=True)
class SimOptions:
    """``events`` counts engine events per replication; the first
    ``warmup`` fraction of them is discarded."""

    seed: int = 0
    warmup: float = 0.2
    events: int = 200_000
    replications: int = 10
    confidence: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warm-up fraction must lie in [0, 1)")
        if self.replications < 1 or self.events < 1:
            raise ValueError("replications and events must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class SimRow:
    entity: str
    kind: str
    cls: str
    throughput: float
    residence: float
    response: float
    queue: float
    utilization: float
    residence_hw: float
    response_hw: float


@dataclass(frozen=True)
class SimCacheRow:
    node: str
    service: str
    entry: str
    hit: float
    miss: float
    hit_hw: float
    requests: int


@dataclass
class SimResult:
    rows: list
    cache: list
    occupancy: dict          # cache-task -> (mean, half-width) arrays over items
    replications: int
    seed: int
    events: int
    flow: list = field(default_factory=list)

    def row(self, entity: str, cls=None) -> SimRow:
        for r in self.rows:
            if r.entity == entity and (cls is None or r.cls == cls):
                return r
        raise KeyError(entity)

    def cache_row(self, entry: str) -> SimCacheRow:
        for r in self.cache:
            if r.entry == entry:
                return r
        raise KeyError(entry)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SIM_COLUMNS)
        for r in self.rows:
            w.writerow([r.entity, r.cls, repr(r.throughput), repr(r.residence), repr(r.queue),
                        repr(r.utilization), repr(r.residence_hw), self.replications, self.seed])
        return buf.getvalue()

    def cache_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node", "service", "p-hit", "p-miss", "ci-half-width", "replications", "seed"))
        for r in self.cache:
            w.writerow([r.node, r.service, repr(r.hit), repr(r.miss), repr(r.hit_hw), self.replications, self.seed])
        return buf.getvalue()


class _Replication:
    def __init__(self, model: LqnModel, rng: np.random.Generator):
        self.m = model
        self.rng = rng
        self.eng = Engine()
        for p in model.processors:
            self.eng.stations[p.id] = PsStation(self.eng, p.id, p.multiplicity, p.infinite)
        for t in model.tasks:
            if t.kind != "reference":
                self.eng.pools[t.id] = ThreadPool(self.eng, t.id, t.multiplicity)
        self.calls: dict = {}       # (entry, ref) -> [count, time sum]
        self.cycles: dict = {}      # ref -> [count, cycle time, own time]
        self.hits: dict = {}        # entry -> [requests, hits]
        self.caches: dict = {}
        for ct in model.cache_tasks:
            cfg = ct.cache_spec
            if len(cfg.lists) != 1:
                raise SimulationError(f"cache-task {ct.id!r}: only single-list caches are simulated")
            pop = cfg.popularity.probabilities(cfg.items)
            m = cfg.capacity
            chosen = rng.choice(cfg.items, size=m, replace=False, p=pop) if m else np.zeros(0, int)
            where = np.zeros(cfg.items, dtype=bool)
            where[chosen] = True
            self.caches[ct.id] = {"slots": [int(k) for k in chosen], "where": where,
                                  "occ": np.zeros(cfg.items), "req": 0}
        self.entry_pop = {}
        for e in model.entries:
            if e.kind == "item":
                cfg = model.task[e.owner_task].cache_spec
                self.entry_pop[e.id] = np.cumsum((e.popularity or cfg.popularity).probabilities(cfg.items))
        self.host = {a.id: self._host_of(a.owner) for a in model.activities}

    def _host_of(self, owner: str) -> str:
        if owner in self.m.entry:
            return self.m.task[self.m.entry[owner].owner_task].host_processor
        return self.m.task[owner].host_processor

    # -- behaviour ---------------------------------------------------------
    def _count(self, draw: float) -> int:
        base = math.floor(draw)
        return base + (1 if self.rng.random() < draw - base else 0)

    def _lookup(self, entry: str, ct: str) -> bool:
        cache = self.caches[ct]
        k = int(np.searchsorted(self.entry_pop[entry], self.rng.random(), side="right"))
        k = min(k, len(cache["where"]) - 1)
        if self.eng.measuring:
            cache["occ"] += cache["where"]
            cache["req"] += 1
        hit = bool(cache["where"][k])
        if not hit:
            cfg = self.m.task[ct].cache_spec
            if not (cfg.no_insert and self.rng.random() < cfg.no_insert) and cache["slots"]:
                j = int(self.rng.integers(len(cache["slots"])))
                cache["where"][cache["slots"][j]] = False
                cache["slots"][j] = k
                cache["where"][k] = True
        if self.eng.measuring:
            rec = self.hits.setdefault(entry, [0, 0])
            rec[0] += 1
            rec[1] += hit
        return hit

    def _body(self, start: str, ref: str, entry, own: list):
        a = start
        rng = self.rng
        while a is not None:
            act = self.m.activity[a]
            d = act.host_demand.sample(rng)
            if d > 0:
                host = self.host[a]
                t0 = self.eng.now
                yield ("ps", host, d, ref)
                if own is not None and self.m.task[ref].host_processor == host:
                    own[0] += self.eng.now - t0
            for cid in act.calls_out:
                call = self.m.call[cid]
                for _ in range(self._count(call.mean_calls)):
                    if call.kind == "synchronous":
                        yield from self._call(call.to_entry, ref)
                    else:
                        self.eng.spawn(self._call(call.to_entry, ref))
            edges = self.m.successors(a)
            if not edges:
                break
            edge = edges[0]
            if edge.kind == "sequence":
                a = edge.to[0]
            elif edge.kind == "or-branch":
                u = rng.random()
                acc = 0.0
                a = edge.to[-1]
                for target, p in zip(edge.to, edge.branch_probabilities):
                    acc += p
                    if u < acc:
                        a = target
                        break
            else:
                hit = self._lookup(entry, self.m.entry[entry].owner_task)
                a = edge.to[0] if hit else edge.to[1]

    def _call(self, entry: str, ref: str):
        t0 = self.eng.now
        e = self.m.entry[entry]
        yield ("acquire", e.owner_task, ref)
        yield from self._body(e.bound_activity, ref, entry, None)
        yield ("release", e.owner_task, ref)
        if self.eng.measuring:
            rec = self.calls.setdefault((entry, ref), [0, 0.0])
            rec[0] += 1
            rec[1] += self.eng.now - t0

    def _user(self, ref: str, roots: list):
        rng = self.rng
        while True:
            t0 = self.eng.now
            own = [0.0]
            root = roots[int(rng.integers(len(roots)))] if len(roots) > 1 else roots[0]
            yield from self._body(root[0], ref, root[1], own)
            if self.eng.measuring:
                rec = self.cycles.setdefault(ref, [0, 0.0, 0.0])
                rec[0] += 1
                rec[1] += self.eng.now - t0
                rec[2] += own[0]
            elif self.eng.now == t0:
                yield ("delay", 0.0)

    # -- run ---------------------------------------------------------------
    def run(self, events: int, warmup: float) -> dict:
        m = self.m
        targets = {b for p in m.precedences for b in p.to}
        for t in m.reference_tasks:
            entries = m.entries_of(t.id)
            if entries:
                roots = [(e.bound_activity, e.id) for e in entries]
            else:
                roots = [(a.id, None) for a in m.activities if a.owner == t.id and a.id not in targets]
            for _ in range(t.multiplicity):
                self.eng.spawn(self._user(t.id, roots))
        self.eng.run(int(events * warmup))
        self.eng.start_measuring()
        self.eng.run(events)
        span = self.eng.now - self.eng.measure_start
        if span <= 0 or not self.cycles:
            raise SimulationError("no completed user cycles after warm-up; increase the event budget")
        return self._collect(span)

    def _collect(self, span: float) -> dict:
        m = self.m
        now = self.eng.now
        out: dict = {}
        for r in m.reference_tasks:
            n, tot, own = self.cycles.get(r.id, [0, 0.0, 0.0])
            Xr = n / span
            resp = (tot - own) / n if n else 0.0
            out[(r.id, "reference", r.id)] = (Xr, resp, resp, r.multiplicity - Xr * (own / n if n else 0.0), 1.0)
            task_rows: dict = {}
            for e in m.entries:
                rec = self.calls.get((e.id, r.id))
                if rec is None:
                    continue
                Xe = rec[0] / span
                W = rec[1] / rec[0]
                out[(e.id, "entry", r.id)] = (Xe, Xe * W / Xr if Xr else 0.0, W, Xe * W, math.nan)
                task_rows.setdefault(e.owner_task, []).append(Xe)
            for t, xs in task_rows.items():
                pool = self.eng.pools[t]
                Q = pool.count[r.id].mean(now) if r.id in pool.count else 0.0
                U = pool.busy[r.id].mean(now) / pool.tokens if r.id in pool.busy else 0.0
                Xt = sum(xs)
                out[(t, "task", r.id)] = (Xt, Q / Xr if Xr else 0.0, Q / Xt if Xt else 0.0, Q, U)
            for p in m.processors:
                st = self.eng.stations[p.id]
                if r.id not in st.count:
                    continue
                Q = st.count[r.id].mean(now)
                U = st.busy[r.id].mean(now)
                Xp = st.done.get(r.id, 0) / span
                out[(p.id, "processor", r.id)] = (Xp, Q / Xr if Xr else 0.0, Q / Xp if Xp else 0.0, Q, U)
        hits = {e: (rec[1] / rec[0], rec[0]) for e, rec in self.hits.items()}
        occ = {ct: c["occ"] / max(c["req"], 1) for ct, c in self.caches.items()}
        flow = {}
        for sid, st in self.eng.stations.items():
            flow[sid] = (st.arrivals, st.departures, len(st.jobs))
        for tid, pool in self.eng.pools.items():
            flow[tid] = (pool.arrivals, pool.departures, pool.in_system)
        return {"rows": out, "hits": hits, "occ": occ, "flow": flow, "events": self.eng.events}


def _replicate(args) -> dict:
    model, seed_seq, events, warmup = args
    rng = np.random.default_rng(seed_seq)
    return _Replication(model, rng).run(events, warmup)


def _ci(values: np.ndarray, confidence: float) -> tuple[float, float]:
    vals = np.asarray(values, dtype=float)
    mean = float(vals.mean())
    if len(vals) < 2:
        return mean, math.inf
    q = stats.t.ppf(0.5 + confidence / 2.0, len(vals) - 1)
    return mean, float(q * vals.std(ddof=1) / math.sqrt(len(vals)))


def simulate(model: LqnModel, options: SimOptions = SimOptions()) -> SimResult:
    """Run independent replications and summarise them with Student-t
    confidence intervals over replication means.

    Raises
    ------
    SimulationError
        For unsupported cache structures or when nothing completes after
        warm-up.
    """
    seeds = np.random.SeedSequence(options.seed).spawn(options.replications)
    jobs = [(model, s, options.events, options.warmup) for s in seeds]
    if options.workers > 1:
        with ProcessPoolExecutor(max_workers=options.workers) as ex:
            reps = list(ex.map(_replicate, jobs))
    else:
        reps = [_replicate(j) for j in jobs]
    keys = list(dict.fromkeys(k for rep in reps for k in rep["rows"]))
    rows = []
    for key in keys:
        vals = np.array([rep["rows"].get(key, (0.0, 0.0, 0.0, 0.0, 0.0)) for rep in reps], dtype=float)
        X, res, resp, Q, U = (float(np.nanmean(vals[:, i])) if not np.all(np.isnan(vals[:, i])) else math.nan
                              for i in range(5))
        _, res_hw = _ci(vals[:, 1], options.confidence)
        _, resp_hw = _ci(vals[:, 2], options.confidence)
        rows.append(SimRow(key[0], key[1], key[2], X, res, resp, Q, U, res_hw, resp_hw))
    cache_rows = []
    for ct in model.cache_tasks:
        for e in model.entries_of(ct.id):
            if e.kind != "item":
                continue
            got = [rep["hits"][e.id] for rep in reps if e.id in rep["hits"]]
            if not got:
                continue
            h, hw = _ci(np.array([g[0] for g in got]), options.confidence)
            cache_rows.append(SimCacheRow(ct.host_processor, ct.id, e.id, h, 1.0 - h, hw, sum(g[1] for g in got)))
    occupancy = {}
    for ct in model.cache_tasks:
        arr = np.array([rep["occ"][ct.id] for rep in reps])
        mean = arr.mean(axis=0)
        hw = np.array([_ci(arr[:, k], options.confidence)[1] for k in range(arr.shape[1])])
        occupancy[ct.id] = (mean, hw)
    return SimResult(rows, cache_rows, occupancy, options.replications, options.seed,
                     int(sum(rep["events"] for rep in reps)), [rep["flow"] for rep in reps])
