"""Two-level solution of a caching sub-model.

The upper part is the cache alone, fed by Poisson streams whose total rate
is the current iterate ``lambda``; the list-cache product form gives hit and
miss probabilities. The lower part is a closed network of ``s`` requests
alternating between a think delay and the hit or miss work at the queueing
stations. The two parts are reconciled by fixed-point iteration on
``lambda``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..cache.listcache import ListCacheSpec, isolated_cache_hit_miss
from ..model.types import CacheConfig
from .mva import ClosedNetwork, MvaResult, SolverConvergenceError, amva_solve, exact_mva_solve

FPI_FORMS = ("little-law", "literal-eq3")
AMVA_VARIANTS = ("linearizer", "bard-schweitzer", "exact-mva")


@dataclass(frozen=True)
class SolverOptions:
    """Controls for the layered solver.

    ``delta`` bounds ``|lambda(n+1) - lambda(n)|`` in caching sub-models;
    ``outer_tol`` is the relative change that ends the layer sweeps.
    ``initial_seed`` switches the initial ``lambda`` guess from ``s / theta_t``
    to a seeded random multiple of it.
    """

    delta: float = 1e-6
    max_inner: int = 500
    max_outer: int = 200
    fpi_form: str = "little-law"
    amva: str = "linearizer"
    outer_tol: float = 1e-6
    max_sweeps: int = 200
    amva_tol: float = 1e-10
    initial_seed: Optional[int] = None

    def __post_init__(self):
        if not self.delta > 0 or not self.outer_tol > 0:
            raise ValueError("tolerances must be > 0")
        if min(self.max_inner, self.max_outer, self.max_sweeps) < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.fpi_form not in FPI_FORMS:
            raise ValueError(f"fpi_form must be one of {FPI_FORMS}")
        if self.amva not in AMVA_VARIANTS:
            raise ValueError(f"amva must be one of {AMVA_VARIANTS}")


def solve_network(net: ClosedNetwork, options: SolverOptions, warm: Optional[dict] = None) -> MvaResult:
    """Solve a sub-model network.

    Single-class networks without open traffic are always solved exactly,
    which costs O(N K); ``options.amva`` selects the method otherwise.
    Multiclass networks with load-dependent stations fall back to the
    default AMVA when exact MVA is requested. ``warm`` is the ``state`` of the
    previous solution of the same sub-model.
    """
    single = net.demands.shape[0] == 1 and not np.any(net.open_util > 0)
    if single and abs(net.populations[0] - round(net.populations[0])) < 1e-9:
        return exact_mva_solve(net)
    if options.amva == "exact-mva" and not net.rates and not np.any(net.open_util > 0):
        return exact_mva_solve(net)
    method = options.amva if options.amva != "exact-mva" else "linearizer"
    if warm is not None:
        # a warm start needs one Linearizer pass; later sweeps refine it further
        return amva_solve(net, tol=options.amva_tol, method=method, linearizer_passes=1, warm=warm)
    return amva_solve(net, tol=options.amva_tol, method=method)


@dataclass
class CachingSubmodelState:
    lam: float
    s: float
    theta_t: float
    theta_m: float
    theta_h: float
    p_hit: float
    p_miss: float
    t: int = 0

    def __post_init__(self):
        if abs(self.p_hit + self.p_miss - 1.0) > 1e-12:
            raise ValueError("p_hit + p_miss must equal 1")
        if self.lam < 0 or self.s < 1:
            raise ValueError("need lambda >= 0 and s >= 1")


def fpi_lambda_update(state: CachingSubmodelState, form: str = "little-law") -> float:
    """One application of the Little's-law update for the cache arrival rate.

    ``little-law``: ``s / (theta_t + p_miss theta_m + p_hit theta_h)``.
    ``literal-eq3``: ``s lambda / (lambda theta_t + p_miss theta_m + p_hit theta_h)``,
    the dimensionally mixed form kept for comparison.
    """
    delay = state.p_miss * state.theta_m + state.p_hit * state.theta_h
    if form == "little-law":
        den = state.theta_t + delay
        num = state.s
    elif form == "literal-eq3":
        den = state.lam * state.theta_t + delay
        num = state.s * state.lam
    else:
        raise ValueError(f"unknown FPI form {form!r}")
    if den <= 0:
        raise ZeroDivisionError("FPI update has a zero denominator")
    return num / den


@dataclass(frozen=True, eq=False)
class CacheUpper:
    """The cache in isolation: one Poisson stream per item entry, with fixed
    shares ``mix`` of the total rate."""

    config: CacheConfig
    popularities: np.ndarray
    mix: np.ndarray
    streams: tuple = ()

    def hit_miss(self, lam: float):
        """Per-stream hit and miss probabilities at total rate ``lam``.

        The product form is invariant to scaling every rate by the same
        factor, so the result depends on ``lam`` only through the fixed mix
        and is memoized on it.
        """
        if not lam > 0:
            raise ValueError("the cache arrival rate must be > 0")
        mix = np.asarray(self.mix, dtype=float)
        pops = np.asarray(self.popularities, dtype=float)
        ph, pm = _hit_miss_by_mix(self.config, pops.tobytes(), pops.shape, mix.tobytes())
        return ph.copy(), pm.copy()


@functools.lru_cache(maxsize=4096)
def _hit_miss_by_mix(config: CacheConfig, pops: bytes, shape: tuple, mix: bytes):
    popularities = np.frombuffer(pops).reshape(shape)
    share = np.frombuffer(mix)
    spec = ListCacheSpec.from_config(config, share, popularities)
    p_hit, p_miss, _ = isolated_cache_hit_miss(spec)
    # streams with zero share still get their own hit probability
    if np.any(share <= 0):
        spec1 = ListCacheSpec.from_config(config, np.ones(len(share)), popularities)
        ph1, pm1, _ = isolated_cache_hit_miss(spec1)
        only = share <= 0
        p_hit, p_miss = np.where(only, ph1, p_hit), np.where(only, pm1, p_miss)
    return np.asarray(p_hit), np.asarray(p_miss)


@dataclass(frozen=True, eq=False)
class CacheLower:
    """Closed part: ``population`` requests, think ``think``, hit and miss
    demands per station and pure delays per branch."""

    population: float
    think: float
    hit_demand: np.ndarray
    miss_demand: np.ndarray
    kinds: tuple
    servers: tuple = ()
    hit_delay: float = 0.0
    miss_delay: float = 0.0
    stations: tuple = ()

    def network(self, p_hit: float) -> ClosedNetwork:
        d = p_hit * np.asarray(self.hit_demand, dtype=float) + (1.0 - p_hit) * np.asarray(self.miss_demand, dtype=float)
        extra = p_hit * self.hit_delay + (1.0 - p_hit) * self.miss_delay
        kinds = tuple(self.kinds) + ("is",)
        servers = (tuple(self.servers) or (1,) * len(self.kinds)) + (1,)
        return ClosedNetwork([self.population], [self.think], np.append(d, extra)[None, :], kinds, servers)


@dataclass
class CachingResult:
    lam: float
    p_hit: float
    p_miss: float
    stream_p_hit: np.ndarray
    stream_p_miss: np.ndarray
    throughput: float
    theta_t: float
    theta_h: float
    theta_m: float
    outer_iterations: int
    inner_iterations: int
    max_inner_iterations: int
    residuals: list = field(default_factory=list)
    lower: Optional[MvaResult] = None


def _branch_delays(lower: CacheLower, res: Optional[MvaResult], p_hit: float):
    hd = np.asarray(lower.hit_demand, dtype=float)
    md = np.asarray(lower.miss_demand, dtype=float)
    if res is None:
        stretch = np.ones(len(hd))
    else:
        merged = p_hit * hd + (1.0 - p_hit) * md
        R = res.residence[0, : len(hd)]
        stretch = np.where(merged > 0, R / np.where(merged > 0, merged, 1.0), 1.0)
    return float(stretch @ hd) + lower.hit_delay, float(stretch @ md) + lower.miss_delay


def solve_caching_submodel(upper: CacheUpper, lower: CacheLower, options: SolverOptions = SolverOptions()) -> CachingResult:
    """Reconcile the cache and the closed lower part by fixed-point iteration.

    Raises
    ------
    SolverConvergenceError
        If either loop exceeds its cap; ``residuals`` holds the history.
    """
    s = float(lower.population)
    theta_t = float(lower.think)
    theta_h, theta_m = _branch_delays(lower, None, 0.0)
    base = theta_t if theta_t > 0 else max(theta_h, theta_m)
    if base <= 0:
        raise ZeroDivisionError("caching sub-model has no think time and no delays")
    lam = s / base
    if options.initial_seed is not None:
        lam *= float(np.random.default_rng(options.initial_seed).uniform(0.5, 2.0))
    residuals = []
    inner_total = inner_max = 0
    res = None
    p_hit_v = p_miss_v = None
    p_hit = 0.0
    for outer in range(1, options.max_outer + 1):
        for inner in range(1, options.max_inner + 1):
            p_hit_v, p_miss_v = upper.hit_miss(lam)
            p_hit = float(np.clip(np.asarray(upper.mix) @ p_hit_v, 0.0, 1.0))
            state = CachingSubmodelState(lam, s, theta_t, theta_m, theta_h, p_hit, 1.0 - p_hit, inner)
            new = fpi_lambda_update(state, options.fpi_form)
            if new <= 0 or not np.isfinite(new):
                raise SolverConvergenceError("FPI produced a non-positive arrival rate", residuals)
            step = abs(new - lam)
            lam = new
            if step < options.delta:
                break
        else:
            raise SolverConvergenceError(f"inner FPI did not converge in {options.max_inner} iterations", residuals)
        inner_total += inner
        inner_max = max(inner_max, inner)
        res = solve_network(lower.network(p_hit), options)
        X = float(res.throughput[0])
        theta_h, theta_m = _branch_delays(lower, res, p_hit)
        r = abs(X - lam)
        residuals.append(r)
        lam = X
        if r < options.delta:
            break
    else:
        raise SolverConvergenceError(f"caching sub-model did not converge in {options.max_outer} iterations", residuals)
    return CachingResult(lam, p_hit, 1.0 - p_hit, np.asarray(p_hit_v), np.asarray(p_miss_v), lam, theta_t,
                         theta_h, theta_m, outer, inner_total, inner_max, residuals, res)
