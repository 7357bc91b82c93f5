"""Mean value analysis of closed multiclass queueing networks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

QUEUE_KINDS = ("ps", "fcfs", "is")
MAX_LATTICE = 10**6


class SolverConvergenceError(RuntimeError):
    def __init__(self, message: str, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass
class ClosedNetwork:
    """Closed network with per-class think times.

    ``demands[c, k]`` is the total service demand of class ``c`` at station
    ``k`` per cycle; ``visits[c, k]`` the number of visits per cycle (only
    used by FCFS stations, defaults to one visit wherever demand is
    positive). ``open_util[k]`` is capacity already taken by open traffic.
    ``rates`` maps a station index to its load-dependent capacity
    ``alpha(1), alpha(2), ...`` (the last value holds beyond the array); such
    a station serves at ``alpha(j) / D`` with ``j`` customers present.
    """

    populations: np.ndarray
    think: np.ndarray
    demands: np.ndarray
    kinds: tuple
    servers: tuple = ()
    visits: Optional[np.ndarray] = None
    scv: Optional[np.ndarray] = None
    open_util: Optional[np.ndarray] = None
    names: tuple = ()
    rates: Optional[dict] = None

    def __post_init__(self):
        self.populations = np.atleast_1d(np.asarray(self.populations, dtype=float))
        self.think = np.atleast_1d(np.asarray(self.think, dtype=float))
        self.demands = np.atleast_2d(np.asarray(self.demands, dtype=float))
        C, K = self.demands.shape
        if self.think.shape != (C,) or self.populations.shape != (C,):
            raise ValueError("populations and think times need one value per class")
        if len(self.kinds) != K:
            raise ValueError("one station kind per column of demands is required")
        if any(k not in QUEUE_KINDS for k in self.kinds):
            raise ValueError(f"station kinds must be in {QUEUE_KINDS}")
        if not self.servers:
            self.servers = (1,) * K
        if self.visits is None:
            self.visits = (self.demands > 0).astype(float)
        if self.scv is None:
            self.scv = np.ones((C, K))
        if self.open_util is None:
            self.open_util = np.zeros(K)
        if np.any(self.demands < 0) or np.any(self.think < 0) or np.any(self.populations < 0):
            raise ValueError("demands, think times and populations must be >= 0")
        self.rates = {int(k): np.asarray(a, dtype=float) for k, a in (self.rates or {}).items()}
        for k, a in self.rates.items():
            if not 0 <= k < K or a.ndim != 1 or a.size == 0 or np.any(a <= 0):
                raise ValueError("load-dependent rates need a positive 1-D array per station")

    def alpha(self, k: int, upto: int) -> np.ndarray:
        """Capacity of station ``k`` with ``1..upto`` customers present."""
        j = np.arange(1, upto + 1)
        if k in self.rates:
            a = self.rates[k]
            return a[np.minimum(j, a.size) - 1]
        if self.kinds[k] == "is":
            return j.astype(float)
        return np.minimum(j, self.servers[k]).astype(float)

    def capacity(self) -> np.ndarray:
        """Peak service capacity per station, used for utilizations."""
        out = []
        for k, (kind, m) in enumerate(zip(self.kinds, self.servers)):
            if k in self.rates:
                out.append(float(self.rates[k].max()))
            else:
                out.append(1.0 if kind == "is" else float(m))
        return np.array(out)

    @classmethod
    def single_class(cls, population, think, demands, kinds=None, servers=()):
        d = np.asarray(demands, dtype=float).reshape(1, -1)
        kinds = tuple(kinds) if kinds is not None else ("ps",) * d.shape[1]
        return cls(np.array([population]), np.array([think]), d, kinds, tuple(servers))


@dataclass
class MvaResult:
    throughput: np.ndarray
    residence: np.ndarray
    queue: np.ndarray
    utilization: np.ndarray
    iterations: int = 0
    residuals: list = field(default_factory=list)
    state: Optional[dict] = None          # warm-start data for a re-solve

    @property
    def response(self) -> np.ndarray:
        return self.residence.sum(axis=1)


def _seen_counts(n: np.ndarray) -> np.ndarray:
    """``less[c, j] = n_j - [c = j]``, floored at zero."""
    less = n[None, :] - np.eye(len(n))
    return np.where(n[None, :] > 0, np.maximum(less, 0.0), 0.0)


def _residence(net: ClosedNetwork, n: np.ndarray, Q: np.ndarray, X: np.ndarray, dev, less=None) -> np.ndarray:
    """Residence times seen by arriving customers at population ``n``.

    ``dev[c, k, j]`` is the Linearizer fractional deviation; ``None`` gives
    the plain Bard-Schweitzer estimate ``Q_j(n - 1_c) = (n_j - [c=j]) Q_j(n) / n_j``.
    """
    D = net.demands
    C, K = D.shape
    safe_n = np.where(n > 0, n, 1.0)
    frac = Q / safe_n[:, None]                       # (C, K) per-customer share
    if less is None:
        less = _seen_counts(n)
    share = frac.T[None, :, :]                       # (1, K, j)
    if dev is not None:
        share = share + dev
    seen = less[:, None, :] * share                  # (c, k, j) customers of j seen at k
    if dev is not None:
        seen = np.maximum(seen, 0.0)
    R = np.zeros((C, K))
    for k in range(K):
        kind = net.kinds[k]
        Dk = D[:, k]
        if k in net.rates:
            R[:, k] = _ld_residence(net, k, n, X) / max(1e-12, 1.0 - net.open_util[k])
            continue
        if kind == "is":
            R[:, k] = Dk
            continue
        m = net.servers[k]
        slow = 1.0 / max(1e-12, 1.0 - net.open_util[k])
        Dq = Dk / m
        A = seen[:, k, :]                            # (c, j)
        if kind == "ps":
            Rq = Dq * (1.0 + A.sum(axis=1)) * slow
        else:
            v = net.visits[:, k]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(v > 0, Dq / np.where(v > 0, v, 1.0), 0.0)
            U = X * Dq
            resid = max(float(np.sum(U * s * (net.scv[:, k] - 1.0) / 2.0)), 0.0)
            Rq = (Dq + v * (A @ s + resid)) * slow
        R[:, k] = Rq + Dk * (m - 1) / m
    return R


def _ld_residence(net: ClosedNetwork, k: int, n: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Residence at a load-dependent station.

    The queue seen by an arriving class-``c`` customer follows the
    birth-death marginal driven by the current throughputs, with class ``c``
    thinned by ``(n_c - 1) / n_c`` for the customer itself.
    """
    D = net.demands[:, k]
    top = int(np.ceil(n.sum()))
    if top <= 0:
        return D / net.alpha(k, 1)[0]
    alpha = net.alpha(k, top)
    j = np.arange(1, top + 1)
    R = np.zeros(len(n))
    for c in range(len(n)):
        if D[c] <= 0 or n[c] <= 0:
            continue
        Xc = X.copy()
        Xc[c] *= max(n[c] - 1.0, 0.0) / n[c]
        load = float(Xc @ D)
        p = np.zeros(top)
        p[0] = 1.0
        if load > 0:
            # p[i] proportional to load^i / prod alpha(1..i), kept in log space
            p = np.exp(np.concatenate(([0.0], np.cumsum(np.log(load) - np.log(alpha[: top - 1])))))
        p /= p.sum()
        R[c] = D[c] * float(np.sum(j / alpha * p))
    return R


def _core(net: ClosedNetwork, n: np.ndarray, Q0: np.ndarray, dev, tol: float, max_iter: int):
    D = net.demands
    active = n > 0
    Q = Q0.copy()
    X = np.zeros(len(n))
    less = _seen_counts(n)
    residuals = []
    for it in range(1, max_iter + 1):
        R = _residence(net, n, Q, X, dev, less)
        cyc = net.think + R.sum(axis=1)
        if np.any(active & (cyc <= 0)):
            raise ValueError("a class has zero think time and zero demand: throughput is unbounded")
        X = np.where(active, n / np.where(cyc > 0, cyc, 1.0), 0.0)
        Qn = X[:, None] * R
        res = float(np.max(np.abs(Qn - Q))) if Q.size else 0.0
        residuals.append(res)
        Q = Qn
        if res < tol:
            return Q, X, R, it, residuals
    raise SolverConvergenceError(f"AMVA did not converge in {max_iter} sweeps", residuals[-20:])


def _initial_queue(net: ClosedNetwork, n: np.ndarray) -> np.ndarray:
    busy = net.demands > 0
    Q = np.zeros(net.demands.shape)
    for c in range(len(n)):
        nk = busy[c].sum()
        if n[c] > 0 and nk:
            Q[c, busy[c]] = n[c] / (nk + 1)
    return Q


AMVA_METHODS = ("linearizer", "bard-schweitzer")


def amva_solve(net: ClosedNetwork, tol: float = 1e-8, max_iter: int = 10_000,
               method: str = "linearizer", linearizer_passes: int = 3, warm: Optional[dict] = None) -> MvaResult:
    """Approximate MVA of a closed network.

    ``method="bard-schweitzer"`` runs the plain Schweitzer fixed point;
    ``"linearizer"`` (default) refines it with the Chandy-Neuse fractional
    deviations estimated from the ``N - 1_c`` populations. Multi-server
    stations use the Seidmann decomposition in both cases.

    ``warm`` is the ``state`` of an earlier result on a network of the same
    shape; iterations then start from its queues and deviations.

    Raises
    ------
    SolverConvergenceError
        When a fixed point has not settled within ``max_iter`` sweeps.
    """
    if method not in AMVA_METHODS:
        raise ValueError(f"unknown AMVA method {method!r}")
    n = net.populations
    C, K = net.demands.shape
    if warm is not None and (warm.get("method") != method or warm["Q"].shape != (C, K)):
        warm = None
    total = 0
    if warm is None or method == "bard-schweitzer":
        Q0 = _initial_queue(net, n) if warm is None else warm["Q"]
        Q, X, R, total, residuals = _core(net, n, Q0, None, tol, max_iter)
    else:
        Q = warm["Q"]
    sub = [None] * C if warm is None else list(warm["sub"])
    dev = None
    if method == "linearizer":
        dev = np.zeros((C, K, C)) if warm is None else warm["dev"].copy()
        safe = np.where(n > 0, n, 1.0)
        for _ in range(linearizer_passes):
            for c in range(C):
                if n[c] <= 0:
                    sub[c] = None
                    continue
                nc = n.copy()
                nc[c] -= 1
                start = sub[c] if sub[c] is not None else Q * (nc / safe)[:, None]
                sub[c], _, _, itc, _ = _core(net, nc, start, dev, tol, max_iter)
                total += itc
            for c in range(C):
                if sub[c] is None:
                    continue
                less = n - (np.arange(C) == c)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(less[None, :] > 0, sub[c].T / np.where(less > 0, less, 1.0)[None, :], 0.0)
                dev[c] = np.where(n[None, :] > 0, ratio - (Q.T / safe[None, :]), 0.0)
            Q, X, R, it, residuals = _core(net, n, Q, dev, tol, max_iter)
            total += it
    U = X[:, None] * net.demands / net.capacity()
    state = {"method": method, "Q": Q, "dev": dev, "sub": sub}
    return MvaResult(X, R, X[:, None] * R, U, total, residuals, state)


def _exact_single(net: ClosedNetwork) -> MvaResult:
    n_max = int(round(net.populations[0]))
    D = net.demands[0]
    K = len(D)
    Z = net.think[0]
    delay = np.array([k == "is" for k in net.kinds])
    # single servers use the queue-length form, the rest track marginals
    plain = np.array([not delay[k] and k not in net.rates and net.servers[k] == 1 for k in range(K)])
    ld = ~delay & ~plain
    ld_idx = np.flatnonzero(ld)
    width = max(n_max, 1)
    alphas = np.array([net.alpha(k, width) for k in ld_idx]) if len(ld_idx) else np.ones((0, width))
    p = np.zeros((len(ld_idx), n_max + 1))
    p[:, 0] = 1.0
    Q = np.zeros(K)
    R = np.where(delay, D, 0.0)
    X = 0.0
    Dld = D[ld_idx][:, None]
    for n in range(1, n_max + 1):
        R[plain] = D[plain] * (1.0 + Q[plain])
        if len(ld_idx):
            j = np.arange(1, n + 1)
            R[ld_idx] = Dld[:, 0] * np.sum(j / alphas[:, :n] * p[:, :n], axis=1)
        cyc = Z + R.sum()
        X = n / cyc if cyc > 0 else 0.0
        Q = X * R
        if len(ld_idx):
            new = np.zeros_like(p)
            new[:, 1 : n + 1] = X * Dld / alphas[:, :n] * p[:, :n]
            new[:, 0] = np.maximum(0.0, 1.0 - new[:, 1:].sum(axis=1))
            p = new
    Rm = R[None, :].copy()
    Xv = np.array([X])
    U = Xv[:, None] * net.demands / net.capacity()
    return MvaResult(Xv, Rm, Xv[:, None] * Rm, U, n_max)


def exact_mva_solve(net: ClosedNetwork, max_lattice: int = MAX_LATTICE) -> MvaResult:
    """Exact MVA by recursion over the population lattice.

    Single-class networks handle multi-server and load-dependent stations
    exactly through marginal probabilities; in the multiclass recursion
    multi-server stations use the Seidmann decomposition. FCFS stations are
    treated as product-form (class-independent exponential service).
    """
    pops = [int(round(x)) for x in net.populations]
    if any(abs(a - b) > 1e-9 for a, b in zip(pops, net.populations)):
        raise ValueError("exact MVA needs integer populations")
    lattice = int(np.prod([p + 1 for p in pops]))
    if lattice > max_lattice:
        raise ValueError(f"population lattice of {lattice} points exceeds the guard ({max_lattice})")
    if np.any(net.open_util > 0):
        raise ValueError("exact MVA does not support open traffic")
    C, K = net.demands.shape
    if C == 1:
        return _exact_single(net)
    if net.rates:
        raise ValueError("exact MVA supports load-dependent stations in single-class networks only")
    D = net.demands
    Z = net.think
    ms = np.array([1 if k == "is" else m for k, m in zip(net.kinds, net.servers)], dtype=float)
    is_delay = np.array([k == "is" for k in net.kinds])
    Qtab = np.zeros(tuple(p + 1 for p in pops) + (K,))
    X = np.zeros(C)
    R = np.zeros((C, K))
    for n in sorted(itertools.product(*[range(p + 1) for p in pops]), key=sum):
        if sum(n) == 0:
            continue
        R = np.zeros((C, K))
        X = np.zeros(C)
        for c in range(C):
            if n[c] == 0:
                continue
            prev = list(n)
            prev[c] -= 1
            Qp = Qtab[tuple(prev)]
            Rc = np.where(is_delay, D[c], D[c] / ms * (1.0 + Qp) + D[c] * (ms - 1) / ms)
            R[c] = Rc
            cyc = Z[c] + Rc.sum()
            X[c] = n[c] / cyc if cyc > 0 else 0.0
        Qtab[tuple(n)] = (X[:, None] * R).sum(axis=0)
    U = X[:, None] * D / ms
    return MvaResult(X, R, X[:, None] * R, U, lattice)
