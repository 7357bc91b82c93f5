"""Layered solution of LQN models with cache-tasks.

Each sweep walks the classes top-down to get call rates, rebuilds entry
service times bottom-up, re-solves every caching sub-model for its hit
probabilities and finally solves the per-depth sub-models by (A)MVA. Sweeps
repeat until residence times and throughputs stop moving.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..model.types import LqnModel
from .caching import (
    CacheLower,
    CacheUpper,
    CachingResult,
    SolverOptions,
    solve_caching_submodel,
    solve_network,
)
from .compile import branch_weights
from .layers import LayerStructure, SubModel, analyze_layers
from .mva import ClosedNetwork, SolverConvergenceError

ENTITY_COLUMNS = ("entity", "class", "throughput", "residence-time", "queue-length", "utilization")
CACHE_COLUMNS = ("node", "service", "p-hit", "p-miss")

FES_POINTS = 16
MIN_RELAXATION = 0.05
EXTRAPOLATE_AFTER = 3

HIT_PATH = np.array([1.0, 1.0, 0.0])
MISS_PATH = np.array([1.0, 0.0, 1.0])


@dataclass
class _Acc:
    """Expected work of one expansion, per customer cycle."""

    d: dict = field(default_factory=dict)      # processor station -> demand
    v: dict = field(default_factory=dict)      # (task station, entry) -> visits
    z: float = 0.0                             # pure delay off any station
    f: dict = field(default_factory=dict)      # entry -> calls (every entry reached)
    od: dict = field(default_factory=dict)     # station -> asynchronous demand

    def add(self, other: "_Acc", w: float) -> None:
        for k, x in other.d.items():
            self.d[k] = self.d.get(k, 0.0) + w * x
        for k, x in other.v.items():
            self.v[k] = self.v.get(k, 0.0) + w * x
        for k, x in other.f.items():
            self.f[k] = self.f.get(k, 0.0) + w * x
        for k, x in other.od.items():
            self.od[k] = self.od.get(k, 0.0) + w * x
        self.z += w * other.z


@dataclass(frozen=True)
class JobClass:
    id: str
    reference: str
    throughput: float
    response: float


@dataclass(frozen=True)
class EntityRow:
    entity: str
    kind: str
    cls: str
    throughput: float
    residence: float
    response: float
    queue: float
    utilization: float


@dataclass(frozen=True)
class CacheRow:
    node: str
    service: str
    entry: str
    p_hit: float
    p_miss: float


@dataclass
class ConvergenceReport:
    sweeps: int
    residuals: list
    caching: dict = field(default_factory=dict)

    @property
    def fpi_outer(self) -> int:
        return max((c.outer_iterations for c in self.caching.values()), default=0)


@dataclass
class SolverResult:
    """Per job class and per entity metrics of one solve.

    Job classes are the entries called directly by reference tasks (or the
    reference task itself when it calls nothing). Entity rows report, per
    reference class, throughput, residence time per user cycle (visits
    times response), mean queue length and utilization.
    """

    model_name: str
    classes: dict
    entities: list
    cache: list
    convergence: ConvergenceReport

    @property
    def total_throughput(self) -> float:
        return float(sum(c.throughput for c in self.classes.values()))

    def entity(self, entity: str, cls: Optional[str] = None) -> EntityRow:
        for row in self.entities:
            if row.entity == entity and (cls is None or row.cls == cls):
                return row
        raise KeyError(entity)

    def residence(self, entity: str) -> float:
        return float(sum(r.residence for r in self.entities if r.entity == entity))

    def p_hit(self, entry: str) -> float:
        for row in self.cache:
            if row.entry == entry:
                return row.p_hit
        raise KeyError(entry)

    def entities_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ENTITY_COLUMNS)
        for r in self.entities:
            w.writerow([r.entity, r.cls, repr(r.throughput), repr(r.residence), repr(r.queue), repr(r.utilization)])
        return buf.getvalue()

    def cache_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CACHE_COLUMNS)
        for r in self.cache:
            w.writerow([r.node, r.service, repr(r.p_hit), repr(r.p_miss)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "total-response-time": total_response_time(self),
            "total-throughput": self.total_throughput,
            "classes": {k: {"reference": c.reference, "throughput": c.throughput, "response-time": c.response}
                        for k, c in self.classes.items()},
            "cache": [{"node": r.node, "service": r.service, "entry": r.entry, "p-hit": r.p_hit,
                       "p-miss": r.p_miss} for r in self.cache],
            "convergence": {"sweeps": self.convergence.sweeps,
                            "residuals": list(self.convergence.residuals[-10:]),
                            "fpi-outer-iterations": self.convergence.fpi_outer},
        }


def total_response_time(result: SolverResult) -> float:
    """Throughput-weighted mean response time over the job classes."""
    X = np.array([c.throughput for c in result.classes.values()])
    R = np.array([c.response for c in result.classes.values()])
    tot = X.sum()
    if not tot > 0:
        raise ZeroDivisionError("total throughput is zero")
    return float(X @ R / tot)


class _Solver:
    def __init__(self, model: LqnModel, options: SolverOptions, p_hit_override: Optional[dict] = None):
        self.model = model
        self.opt = options
        self.st: LayerStructure = analyze_layers(model)
        self.prof = self.st.profiles
        self.override = dict(p_hit_override or {})
        self.classes = sorted(self.st.populations, key=lambda c: (self.st.class_depth[c], self.st.order.index(c)))
        self.refs = [c for c in self.classes if self.model.task[c].kind == "reference"]
        self.p_hit: dict[str, float] = {}
        self.stretch: dict = {}
        self.wait: dict = {}
        self.R: dict = {}
        self.D: dict = {}
        self.X: dict = {c: 1.0 for c in self.classes}
        self.S: dict = {}
        self.S2: dict = {}
        self.acc: dict = {}
        self.eacc: dict = {}
        self.share: dict = {}
        self.flows_by_ref: dict = {}
        self.caching: dict = {}
        self.fes: dict = {}
        # under-relaxation weight of new sub-model results, lowered on oscillation
        self.omega = 1.0
        self.warm: dict = {}
        self._init_cache()

    # -- expansion ---------------------------------------------------------
    def _weights(self, pid: str) -> np.ndarray:
        return branch_weights(self.p_hit.get(pid, 1.0))

    def _expand(self, pid: str, scale: float, acc: _Acc, mask=None, open_=False) -> None:
        prof = self.prof[pid]
        w = self._weights(pid) if mask is None else mask
        acc.f[pid] = acc.f.get(pid, 0.0) + scale
        dem = float(prof.demand @ w) * scale
        host = prof.processor
        if dem:
            if host in self.st.stations:
                if open_:
                    acc.od[host] = acc.od.get(host, 0.0) + dem
                else:
                    acc.d[host] = acc.d.get(host, 0.0) + dem
            elif not open_:
                acc.z += dem
        for (to, kind), y in prof.calls.items():
            y = float(y @ w) * scale
            if not y:
                continue
            task = self.model.entry[to].owner_task
            if kind == "asynchronous" or open_:
                self._expand(to, y, acc, open_=True)
            elif task in self.st.stations:
                acc.v[(task, to)] = acc.v.get((task, to), 0.0) + y
                acc.f[to] = acc.f.get(to, 0.0) + y
            else:
                self._expand(to, y, acc)

    def _time(self, cls: str, acc: _Acc) -> float:
        t = acc.z
        for st, d in acc.d.items():
            t += d * self.stretch.get((cls, st), 1.0)
        for (st, e), v in acc.v.items():
            t += v * (self.S.get(e, 0.0) + self.wait.get((cls, st), 0.0))
        return t

    # -- caches ------------------------------------------------------------
    def _streams(self, ct: str):
        task = self.model.task[ct]
        entries = [e for e in self.model.entries_of(ct) if e.kind == "item"]
        n = task.cache_spec.items
        pops = np.array([(e.popularity or task.cache_spec.popularity).probabilities(n) for e in entries])
        return entries, pops

    def _init_cache(self) -> None:
        for ct in self.model.cache_tasks:
            entries, pops = self._streams(ct.id)
            if not entries:
                continue
            mix = np.full(len(entries), 1.0 / len(entries))
            ph, _ = CacheUpper(ct.cache_spec, pops, mix).hit_miss(1.0)
            for e, p in zip(entries, ph):
                self.p_hit[e.id] = float(p)
        self.p_hit.update(self.override)

    def _branch_view(self, ct: str, entries, mix):
        """Pooled hit/miss work of a cache-task over its executing classes."""
        host = self.model.task[ct].host_processor
        cls_w = {}
        for c in self.st.executing_classes(ct):
            flow = sum(self.acc[c].f.get(e.id, 0.0) * self.X[c] for e in entries) if c in self.acc else 0.0
            cls_w[c] = flow
        tot = sum(cls_w.values())
        cls_w = {c: (w / tot if tot > 0 else 1.0 / len(cls_w)) for c, w in cls_w.items()}
        out = {}
        for name, mask in (("hit", HIT_PATH), ("miss", MISS_PATH)):
            host_d = delay = full = 0.0
            for c, wc in cls_w.items():
                for e, m in zip(entries, mix):
                    acc = _Acc()
                    self._expand(e.id, 1.0, acc, mask=mask)
                    hd = acc.d.get(host, 0.0)
                    t = self._time(c, acc)
                    host_d += wc * m * hd
                    delay += wc * m * (t - hd * self.stretch.get((c, host), 1.0))
                    full += wc * m * t
            out[name] = (host_d, delay, full)
        return out

    def _split(self, ct: str):
        """(entries, upper, lower) for the caching sub-model of ``ct``."""
        entries, pops = self._streams(ct)
        task = self.model.task[ct]
        rates = np.array([sum(self.acc[c].f.get(e.id, 0.0) * self.X[c] for c in self.acc) for e in entries])
        tot = rates.sum()
        mix = rates / tot if tot > 0 else np.full(len(entries), 1.0 / len(entries))
        view = self._branch_view(ct, entries, mix)
        st = self.st.stations.get(task.host_processor)
        s = max(1, self.st.executing_population(ct))
        p_now = float(mix @ np.array([self.p_hit.get(e.id, 1.0) for e in entries]))
        cycle = p_now * view["hit"][2] + (1.0 - p_now) * view["miss"][2]
        theta_t = max(s / tot - cycle, 0.0) if tot > 0 else 0.0
        if st is not None:
            lower = CacheLower(s, theta_t, np.array([view["hit"][0]]), np.array([view["miss"][0]]),
                               (st.queue,), (st.servers,), view["hit"][1], view["miss"][1], (st.id,))
        else:
            lower = CacheLower(s, theta_t, np.zeros(0), np.zeros(0), (), (), view["hit"][2], view["miss"][2])
        upper = CacheUpper(task.cache_spec, pops, mix, tuple(e.id for e in entries))
        return entries, upper, lower

    def _solve_cache(self, ct: str) -> None:
        if any(e.id in self.override for e in self.model.entries_of(ct)):
            return
        entries, upper, lower = self._split(ct)
        if not entries:
            return
        if lower.think <= 0 and lower.hit_delay + lower.miss_delay <= 0 and not (
                np.any(lower.hit_demand) or np.any(lower.miss_demand)):
            ph, _ = upper.hit_miss(1.0)
        else:
            res = solve_caching_submodel(upper, lower, self.opt)
            self.caching[ct] = res
            ph = res.stream_p_hit
        for e, p in zip(entries, ph):
            self.p_hit[e.id] = float(p)

    def _prime(self) -> None:
        # a first pass at zero contention fixes call mixes and throughputs
        self._top_down()
        self._bottom_up()
        for r in self.refs:
            t = self._time(r, self.acc[r])
            self.X[r] = self.st.populations[r] / t if t > 0 else 1.0

    # -- sweeps ------------------------------------------------------------
    def _top_down(self) -> None:
        flows: dict[str, float] = {}
        by_ref: dict[str, dict] = {}
        self.acc = {}
        for c in self.classes:
            if c in self.refs:
                acc = _Acc()
                self._expand(c, 1.0, acc)
                self.share[c] = {c: 1.0}
            else:
                ents = [e.id for e in self.model.entries_of(c)]
                Xc = sum(flows.get(e, 0.0) for e in ents)
                self.X[c] = Xc
                acc = _Acc()
                for e in ents:
                    m = flows.get(e, 0.0) / Xc if Xc > 0 else 1.0 / len(ents)
                    if m:
                        self._expand(e, m, acc)
                sh: dict[str, float] = {}
                for e in ents:
                    for r, x in by_ref.get(e, {}).items():
                        sh[r] = sh.get(r, 0.0) + x
                self.share[c] = {r: x / Xc for r, x in sh.items()} if Xc > 0 else {}
            self.acc[c] = acc
            for (st, e), v in acc.v.items():
                flows[e] = flows.get(e, 0.0) + self.X[c] * v
                d = by_ref.setdefault(e, {})
                for r, x in self.share[c].items():
                    d[r] = d.get(r, 0.0) + self.X[c] * v * x
        self.eacc = {}
        for c in self.classes:
            if c in self.refs:
                continue
            for e in self.model.entries_of(c):
                acc = _Acc()
                self._expand(e.id, 1.0, acc)
                self.eacc[e.id] = (c, acc)

    def _bottom_up(self) -> None:
        for c in reversed(self.classes):
            if c in self.refs:
                continue
            for e in self.model.entries_of(c):
                cls, acc = self.eacc[e.id]
                prof = self.prof[e.id]
                if prof.cache_access:
                    p = self.p_hit.get(e.id, 1.0)
                    th = self._path_time(cls, e.id, HIT_PATH)
                    tm = self._path_time(cls, e.id, MISS_PATH)
                    self.S[e.id] = p * th + (1.0 - p) * tm
                    self.S2[e.id] = 2.0 * (p * th * th + (1.0 - p) * tm * tm)
                else:
                    s = self._time(cls, acc)
                    self.S[e.id] = s
                    self.S2[e.id] = 2.0 * s * s

    def _path_time(self, cls: str, pid: str, mask) -> float:
        acc = _Acc()
        self._expand(pid, 1.0, acc, mask=mask)
        return self._time(cls, acc)

    def _idle(self, c: str) -> float:
        n = self.st.populations[c]
        return max(n / self.X[c] - self._time(c, self.acc[c]), 0.0) if self.X[c] > 0 else 0.0

    def _network(self, sub: SubModel) -> ClosedNetwork:
        C, K = len(sub.classes), len(sub.stations)
        D = np.zeros((C, K))
        V = np.zeros((C, K))
        scv = np.ones((C, K))
        ids = sub.station_ids
        inside = set(ids)
        think = np.zeros(C)
        pops = np.zeros(C)
        open_util = np.zeros(K)
        rates = {k: self.fes[st.id][0] for k, st in enumerate(sub.stations) if st.id in self.fes}
        for i, c in enumerate(sub.classes):
            acc = self.acc[c]
            pops[i] = self.st.populations[c]
            for k, st in enumerate(sub.stations):
                if st.kind == "processor":
                    D[i, k] = acc.d.get(st.id, 0.0)
                    V[i, k] = 1.0 if D[i, k] > 0 else 0.0
                else:
                    m1 = m2 = 0.0
                    for (s_id, e), v in acc.v.items():
                        if s_id == st.id:
                            V[i, k] += v
                            m1 += v * self.S.get(e, 0.0)
                            m2 += v * self.S2.get(e, 0.0)
                    D[i, k] = m1 * (self.fes[st.id][1] if st.id in self.fes else 1.0)
                    if V[i, k] > 0 and m1 > 0:
                        mean = m1 / V[i, k]
                        scv[i, k] = max(m2 / V[i, k] / mean**2 - 1.0, 0.0)
                open_util[k] += self.X[c] * acc.od.get(st.id, 0.0) / st.servers
            think[i] = self._outside(c, inside) + (0.0 if c in self.refs else self._idle(c))
        if np.any(open_util >= 1.0):
            raise SolverConvergenceError("asynchronous load saturates a station", [float(open_util.max())])
        kinds = tuple(s.queue for s in sub.stations)
        servers = tuple(s.servers for s in sub.stations)
        return ClosedNetwork(pops, think, D, kinds, servers, V, scv, open_util, ids, rates)

    def _outside(self, c: str, inside) -> float:
        """Time class ``c`` spends away from the stations in ``inside``."""
        acc = self.acc[c]
        visited = set(acc.d).union(s for s, _ in acc.v)
        t = acc.z
        for st_id in visited:
            if st_id in self.st.stations and st_id not in inside:
                t += self.R.get((c, st_id), self._nominal(c, st_id))
        return t

    def _nominal(self, c: str, st_id: str) -> float:
        acc = self.acc[c]
        if st_id in acc.d:
            return acc.d[st_id]
        return sum(v * self.S.get(e, 0.0) for (s, e), v in acc.v.items() if s == st_id)

    def _flow_equivalent(self) -> None:
        """Load-dependent capacities of multi-threaded task stations.

        With ``j`` busy threads the task completes ``j / C(j)`` requests per
        unit time, ``C(j)`` being the cycle time of its class in the layers
        below. The station is then served at ``alpha(j) = j C(1) / C(j)``
        times the uncontended rate, capped at ``j = threads``.
        """
        fes = {}
        for t, st in self.st.stations.items():
            if st.kind != "task" or t not in self.acc:
                continue
            subs = [s for s in self.st.submodels if t in s.classes]
            if not subs:
                continue
            inside = {x for s in subs for x in s.station_ids}
            fixed = self._outside(t, inside)
            T = self.st.populations[t]
            if T == 1:
                continue
            points = np.unique(np.round(np.geomspace(1, T, min(T, FES_POINTS))).astype(int))
            nets = [self._network(s) for s in subs]
            idle = self._idle(t)
            cyc = []
            for j in points:
                c_j = fixed
                for s, net in zip(subs, nets):
                    i = s.classes.index(t)
                    pops = net.populations.copy()
                    pops[i] = j
                    think = net.think.copy()
                    think[i] = max(think[i] - idle, 0.0)
                    trial = ClosedNetwork(pops, think, net.demands, net.kinds, net.servers, net.visits,
                                          net.scv, net.open_util, net.names, net.rates)
                    c_j += float(solve_network(trial, self.opt).residence[i].sum())
                cyc.append(c_j)
            cyc = np.array(cyc)
            if not cyc[0] > 0:
                continue
            j = np.arange(1, T + 1)
            alpha = j * cyc[0] / np.interp(j, points, cyc)
            now = self._time(t, self.acc[t])
            fes[t] = (alpha, cyc[0] / now if now > 0 else 1.0)
        self.fes = fes

    def _blend(self, table: dict, key, value: float) -> None:
        old = table.get(key)
        table[key] = value if old is None else self.omega * value + (1.0 - self.omega) * old

    def _solve_submodels(self) -> None:
        depth = None
        for sub in self.st.submodels:
            if not sub.classes:
                continue
            if depth is not None and sub.depth != depth:
                # lower layers see the call rates implied by the new throughputs
                self._top_down()
            depth = sub.depth
            net = self._network(sub)
            res = solve_network(net, self.opt, self.warm.get(sub.index))
            self.warm[sub.index] = res.state
            for i, c in enumerate(sub.classes):
                for k, st in enumerate(sub.stations):
                    r = float(res.residence[i, k])
                    d = float(net.demands[i, k]) / (self.fes[st.id][1] if st.id in self.fes else 1.0)
                    self._blend(self.R, (c, st.id), r)
                    self.D[(c, st.id)] = d
                    if st.kind == "processor":
                        self._blend(self.stretch, (c, st.id), r / d if d > 0 else 1.0)
                    else:
                        v = float(net.visits[i, k])
                        self._blend(self.wait, (c, st.id), (r - d) / v if v > 0 else 0.0)
                if c in self.refs:
                    self._blend(self.X, c, float(res.throughput[i]))

    def _snapshot(self) -> np.ndarray:
        vals = [self.X[c] for c in self.classes] + [self.R[k] for k in sorted(self.R)]
        vals += [self.p_hit[k] for k in sorted(self.p_hit)]
        return np.array(vals)

    def _state(self) -> tuple[list, np.ndarray]:
        keys = [("X", r) for r in self.refs]
        for name in ("R", "stretch", "wait"):
            keys += [(name, k) for k in getattr(self, name)]
        return keys, np.array([getattr(self, name)[k] for name, k in keys])

    def _extrapolate(self, keys: list, old: np.ndarray, new: np.ndarray, rho: float) -> None:
        """Jump ahead along a geometrically converging direction."""
        x = np.maximum(new + (new - old) * rho / (1.0 - rho), 0.0)
        for (name, k), v in zip(keys, x):
            getattr(self, name)[k] = float(v)

    def run(self) -> SolverResult:
        self._prime()
        prev = None
        residuals = []
        state = None
        last_jump = 0
        for sweep in range(1, self.opt.max_sweeps + 1):
            self._top_down()
            self._bottom_up()
            for ct in self.model.cache_tasks:
                self._solve_cache(ct.id)
            self._flow_equivalent()
            self._solve_submodels()
            for r in self.refs:
                if not any(r in s.classes for s in self.st.submodels):
                    t = self._time(r, self.acc[r])
                    self.X[r] = self.st.populations[r] / t if t > 0 else 0.0
            snap = self._snapshot()
            keys, vec = self._state()
            if prev is not None and len(prev) == len(snap):
                scale = np.maximum(np.abs(snap), 1e-12)
                res = float(np.max(np.abs(snap - prev) / scale)) if snap.size else 0.0
                if len(residuals) >= 2 and res > residuals[-1] > residuals[-2]:
                    # two growing residuals in a row: damp harder
                    self.omega = max(MIN_RELAXATION, 0.5 * self.omega)
                elif residuals and res > residuals[-1] and self.omega > 0.5:
                    self.omega = 0.5
                residuals.append(res)
                if res < self.opt.outer_tol:
                    break
                if (self.omega == 1.0 and sweep - last_jump > EXTRAPOLATE_AFTER and state is not None
                        and state[0] == keys and len(residuals) > EXTRAPOLATE_AFTER):
                    tail = np.array(residuals[-EXTRAPOLATE_AFTER - 1:])
                    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
                    rho = float(ratios[-1])
                    # a slow monotone mode: steady contraction ratio
                    if 0.5 < rho < 0.98 and np.ptp(ratios) < 0.05:
                        self._extrapolate(keys, state[1], vec, rho)
                        last_jump = sweep
                        keys, vec = self._state()
                        snap = self._snapshot()
            state = (keys, vec)
            prev = snap
        else:
            raise SolverConvergenceError(f"layer sweeps did not converge in {self.opt.max_sweeps} sweeps",
                                         residuals[-20:])
        self._top_down()
        self._bottom_up()
        return self._result(sweep, residuals)

    # -- reporting ---------------------------------------------------------
    def _entry_response(self, e: str, callers: dict) -> float:
        """Mean time per call of entry ``e`` weighted over calling classes."""
        task = self.model.entry[e].owner_task
        tot = sum(callers.values())
        if tot <= 0:
            return 0.0
        out = 0.0
        for c, w in callers.items():
            if task in self.st.stations:
                r = self.S.get(e, 0.0) + self.wait.get((c, task), 0.0)
            else:
                r = self._time(c, self._entry_acc(e))
            out += w / tot * r
        return out

    def _entry_acc(self, e: str) -> _Acc:
        acc = _Acc()
        self._expand(e, 1.0, acc)
        return acc

    def _result(self, sweeps: int, residuals: list) -> SolverResult:
        m = self.model
        rows: list[EntityRow] = []
        classes: dict[str, JobClass] = {}
        # flow of entry e attributable to reference r, per calling class
        flow: dict[str, dict] = {}
        for c, acc in self.acc.items():
            for e, x in acc.f.items():
                # a class's own entries are counted at the caller's visit
                if e == c or self.model.entry.get(e) is not None and self.model.entry[e].owner_task == c:
                    continue
                for r, sh in self.share[c].items():
                    flow.setdefault(e, {}).setdefault(r, {})
                    flow[e][r][c] = flow[e][r].get(c, 0.0) + self.X[c] * x * sh
        resp = {}
        for e in flow:
            callers: dict[str, float] = {}
            for r, per in flow[e].items():
                for c, x in per.items():
                    callers[c] = callers.get(c, 0.0) + x
            resp[e] = self._entry_response(e, callers)
        for r in self.refs:
            Xr = self.X[r]
            N = self.st.populations[r]
            Z = self.acc[r].z
            Rr = max(N / Xr - Z, 0.0) if Xr > 0 else 0.0
            top = [to for (to, kind) in self.prof[r].calls if kind == "synchronous"]
            for e in dict.fromkeys(top):
                Xe = sum(flow.get(e, {}).get(r, {}).values())
                classes[e] = JobClass(e, r, Xe, resp.get(e, 0.0))
            if not top:
                classes[r] = JobClass(r, r, Xr, Rr)
            rows.append(EntityRow(r, "reference", r, Xr, Rr, Rr, N - Xr * Z, 1.0))
            task_acc: dict[str, list] = {}
            for e in m.entries:
                if e.id not in flow or r not in flow[e.id]:
                    continue
                Xe = sum(flow[e.id][r].values())
                W = resp[e.id]
                t = m.task[e.owner_task]
                util = Xe * self.S.get(e.id, W) / t.multiplicity
                row = EntityRow(e.id, "entry", r, Xe, Xe * W / Xr if Xr > 0 else 0.0, W, Xe * W, util)
                rows.append(row)
                task_acc.setdefault(t.id, []).append(row)
            for t in m.tasks:
                if t.id not in task_acc:
                    continue
                rs = task_acc[t.id]
                Xt = sum(x.throughput for x in rs)
                Q = sum(x.queue for x in rs)
                rows.append(EntityRow(t.id, "task", r, Xt, Q / Xr if Xr > 0 else 0.0, Q / Xt if Xt > 0 else 0.0,
                                      Q, sum(x.utilization for x in rs)))
            for p in m.processors:
                Q = U = Xp = 0.0
                seen = False
                for c, acc in self.acc.items():
                    sh = self.share[c].get(r, 0.0)
                    if not sh:
                        continue
                    if p.id in acc.d:
                        seen = True
                        Q += sh * self.X[c] * self.R.get((c, p.id), acc.d[p.id])
                        U += sh * self.X[c] * acc.d[p.id]
                for e in m.entries:
                    if m.task[e.owner_task].host_processor == p.id and e.id in flow and r in flow[e.id]:
                        Xp += sum(flow[e.id][r].values())
                if p.id in [t.host_processor for t in m.tasks if t.id == r]:
                    seen = True
                    Q += Xr * Z
                    U += Xr * Z
                    Xp += Xr
                if not seen:
                    continue
                servers = 1 if p.infinite else p.multiplicity
                rows.append(EntityRow(p.id, "processor", r, Xp, Q / Xr if Xr > 0 else 0.0,
                                      Q / Xp if Xp > 0 else 0.0, Q, U / servers))
        cache_rows = []
        for ct in m.cache_tasks:
            for e in m.entries_of(ct.id):
                if e.kind == "item":
                    p = self.p_hit.get(e.id, 1.0)
                    cache_rows.append(CacheRow(ct.host_processor, ct.id, e.id, p, 1.0 - p))
        return SolverResult(m.name, classes, rows, cache_rows,
                            ConvergenceReport(sweeps, residuals, dict(self.caching)))


def solve_lqn(model: LqnModel, options: SolverOptions = SolverOptions(),
              p_hit: Optional[dict] = None) -> SolverResult:
    """Solve a layered model with cache-tasks.

    ``p_hit`` optionally pins the hit probability of item entries (keyed by
    entry id), bypassing their caching sub-model.

    Raises
    ------
    SolverConvergenceError
        When layer sweeps or a caching sub-model fail to converge.
    """
    return _Solver(model, options, p_hit).run()


def split_caching_submodel(model: LqnModel, sub: SubModel, cache_task: Optional[str] = None,
                           options: SolverOptions = SolverOptions()):
    """Upper (cache) and lower (closed) parts of a caching sub-model, built at
    the no-contention starting point of the solver."""
    if not sub.cache_tasks:
        raise ValueError(f"sub-model {sub.index} contains no cache-task")
    if cache_task is None:
        if len(sub.cache_tasks) > 1:
            raise ValueError(f"sub-model {sub.index} holds several cache-tasks {sub.cache_tasks}; name one")
        cache_task = sub.cache_tasks[0]
    elif cache_task not in sub.cache_tasks:
        raise ValueError(f"{cache_task!r} is not part of sub-model {sub.index}")
    sv = _Solver(model, options)
    sv._prime()
    sv._top_down()
    sv._bottom_up()
    entries, upper, lower = sv._split(cache_task)
    if not entries:
        raise ValueError(f"cache-task {cache_task!r} has no item entries")
    return upper, lower
