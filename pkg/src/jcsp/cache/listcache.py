"""Stationary analysis of list-based caches under random replacement.

The equilibrium distribution of an RR list cache has product form: a state
assigning item ``k`` to list ``j`` has weight proportional to the product of
access factors ``gamma[k, j]``. All normalizing constants here use the set
convention: the ``m_j!`` orderings of each list are dropped because they
cancel in every marginal ratio.

Normalizing constants are coefficients of the generating function
``prod_k (1 + sum_j gamma[k, j] z_j)``, truncated at the list capacities and
accumulated item by item with running log-scale factors. Leave-one-out
constants combine a prefix and a suffix table, so no subtraction (and no
cancellation) is ever performed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model.validate import parent_chains_ok


class CacheModelError(ValueError):
    pass


class NumericalInstabilityError(ArithmeticError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


def default_access(parents, no_insert: float = 0.0) -> np.ndarray:
    h = len(parents)
    c = np.zeros((h + 1, h + 1))
    for j in range(1, h + 1):
        par = parents[j - 1]
        c[par, j] = 1.0 / sum(1 for q in parents if q == par)
    c[0, 1:] *= 1.0 - no_insert
    c[0, 0] = no_insert
    return c


@dataclass(frozen=True, eq=False)
class ListCacheSpec:
    """Markovian list-cache model.

    Attributes
    ----------
    n : int
        Total number of items.
    capacities : tuple of int
        ``m_1 .. m_h``; list 0 implicitly holds the remaining ``n - sum(m)``.
    parents : tuple of int
        ``p(l)`` for ``l = 1..h``.
    rates : ndarray, shape (u, n, h+1)
        ``lambda[v, k, l]``: request rate of stream ``v`` for item ``k``
        while the item sits in list ``l`` (requests per second).
    access : ndarray, shape (u, n, h+1, h+1)
        ``c[v, k, l, j]``: probability that a request moves item ``k`` from
        list ``l`` to list ``j``.
    """

    n: int
    capacities: tuple
    parents: tuple
    rates: np.ndarray
    access: np.ndarray

    def __post_init__(self):
        h = len(self.capacities)
        if len(self.parents) != h:
            raise CacheModelError("one parent per list is required")
        if any(int(c) < 1 for c in self.capacities):
            raise CacheModelError("list capacities must be positive integers")
        if sum(self.capacities) > self.n:
            raise CacheModelError(f"total capacity {sum(self.capacities)} exceeds item count {self.n}")
        if not parent_chains_ok(self.parents):
            raise CacheModelError("malformed parent topology: chains must terminate at list 0")
        if self.rates.shape[1:] != (self.n, h + 1):
            raise CacheModelError(f"rates must have shape (u, {self.n}, {h + 1}), got {self.rates.shape}")
        if self.access.shape != (self.rates.shape[0], self.n, h + 1, h + 1):
            raise CacheModelError("access probabilities have the wrong shape")
        if np.any(self.rates < 0):
            raise CacheModelError("arrival rates must be >= 0")
        if np.any(self.access < 0) or np.any(self.access.sum(axis=-1) > 1 + 1e-12):
            raise CacheModelError("access probabilities out of [0, 1] or summing above 1")

    @property
    def h(self) -> int:
        return len(self.capacities)

    @property
    def streams(self) -> int:
        return self.rates.shape[0]

    @classmethod
    def build(cls, n, capacities, parents=None, rates=None, access=None, no_insert: float = 0.0):
        """Construct a spec, broadcasting per-item rates over the lists.

        ``rates`` may be shaped ``(n,)``, ``(u, n)`` or ``(u, n, h+1)``.
        """
        capacities = tuple(int(c) for c in capacities)
        h = len(capacities)
        parents = tuple(range(h)) if parents is None else tuple(int(p) for p in parents)
        lam = np.asarray(rates, dtype=float)
        if lam.ndim == 1:
            lam = lam[None, :]
        if lam.ndim == 2:
            lam = np.repeat(lam[:, :, None], h + 1, axis=2)
        u = lam.shape[0]
        if access is None:
            c = default_access(parents, no_insert)
            access = np.broadcast_to(c, (u, n, h + 1, h + 1)).copy()
        else:
            access = np.asarray(access, dtype=float)
            if access.ndim == 2:
                access = np.broadcast_to(access, (u, n, h + 1, h + 1)).copy()
        return cls(int(n), capacities, parents, lam, access)

    @classmethod
    def single_list(cls, rates, capacity: int, no_insert: float = 0.0):
        lam = np.asarray(rates, dtype=float)
        return cls.build(lam.shape[-1], (capacity,), (0,), lam, no_insert=no_insert)

    @classmethod
    def from_config(cls, config, stream_rates, popularities):
        """Spec for a model cache-task: stream ``v`` requests item ``k`` at
        ``stream_rates[v] * popularities[v][k]``."""
        pops = np.asarray(popularities, dtype=float).reshape(len(stream_rates), config.items)
        lam = np.asarray(stream_rates, dtype=float)[:, None] * pops
        return cls.build(config.items, config.capacities, config.parents, lam,
                         access=config.access_matrix())

    def with_rates(self, rates) -> "ListCacheSpec":
        return ListCacheSpec.build(self.n, self.capacities, self.parents, rates, self.access)


def access_factors(spec: ListCacheSpec) -> np.ndarray:
    """Access factors ``gamma[k, j]`` (shape ``(n, h+1)``, ``gamma[:, 0] = 1``).

    ``gamma[k, j] = gamma[k, p(j)] * sum_v lambda[v, k, p(j)] * c[v, k, p(j), j]``
    """
    h = spec.h
    gamma = np.zeros((spec.n, h + 1))
    gamma[:, 0] = 1.0
    done = {0}
    order = []
    while len(order) < h:
        progressed = False
        for j in range(1, h + 1):
            if j not in done and spec.parents[j - 1] in done:
                order.append(j)
                done.add(j)
                progressed = True
        if not progressed:
            raise CacheModelError("malformed parent topology")
    for j in order:
        p = spec.parents[j - 1]
        flow = np.einsum("vk,vk->k", spec.rates[:, :, p], spec.access[:, :, p, j])
        gamma[:, j] = gamma[:, p] * flow
    return gamma


@dataclass(frozen=True, eq=False)
class NormalizingConstants:
    """Log normalizing constants (set convention).

    ``log_E_loo[k]`` is the constant with item ``k`` removed at the same
    capacities; ``log_E_loo_minus[l - 1, k]`` additionally has list ``l``
    shrunk by one slot.
    """

    log_E: float
    log_E_loo: np.ndarray
    log_E_loo_minus: np.ndarray

    @staticmethod
    def _lin(x):
        if np.any(np.asarray(x) > 709.0):
            raise OverflowError("normalizing constant exceeds float range; use the log values")
        return np.exp(x)

    @property
    def E(self) -> float:
        return float(self._lin(self.log_E))

    @property
    def E_loo(self) -> np.ndarray:
        return self._lin(self.log_E_loo)

    @property
    def E_loo_minus(self) -> np.ndarray:
        return self._lin(self.log_E_loo_minus)


def _poly_tables(g: np.ndarray, caps: tuple):
    """Prefix and suffix truncated generating functions with log scales.

    ``g`` is ``(n, h)`` (access factors for lists 1..h, already scaled).
    Returns (P, sP, S, sS); ``P[k]`` covers items ``< k`` and ``S[k]`` items
    ``>= k``; true coefficient = table * exp(scale).
    """
    n, h = g.shape
    shape = tuple(c + 1 for c in caps)
    P = np.zeros((n + 1,) + shape)
    S = np.zeros((n + 2,) + shape)
    sP = np.zeros(n + 1)
    sS = np.zeros(n + 2)
    origin = (0,) * h
    P[0][origin] = 1.0
    S[n][origin] = 1.0
    S[n + 1][origin] = 1.0

    def mul(poly, gk):
        out = poly.copy()
        for j in range(h):
            if gk[j] == 0.0:
                continue
            dst = [slice(None)] * h
            src = [slice(None)] * h
            dst[j] = slice(1, None)
            src[j] = slice(None, -1)
            out[tuple(dst)] += gk[j] * poly[tuple(src)]
        mx = out.max()
        return out / mx, math.log(mx)

    for k in range(n):
        P[k + 1], ds = mul(P[k], g[k])
        sP[k + 1] = sP[k] + ds
    for k in range(n - 1, -1, -1):
        S[k], ds = mul(S[k + 1], g[k])
        sS[k] = sS[k + 1] + ds
    return P, sP, S, sS


def _coef_product(A: np.ndarray, B: np.ndarray, target: tuple) -> np.ndarray:
    """Coefficient at ``target`` of the product of polynomial stacks A[k]*B[k]."""
    box = tuple(slice(0, t + 1) for t in target)
    rev = tuple(slice(t, None, -1) if t > 0 else slice(0, 1) for t in target)
    a = A[(slice(None),) + box]
    b = B[(slice(None),) + rev]
    axes = tuple(range(1, a.ndim))
    return np.sum(a * b, axis=axes)


def normalizing_constant(gamma: np.ndarray, capacities) -> NormalizingConstants:
    """Normalizing constant E(m) and all leave-one-out constants.

    Parameters
    ----------
    gamma : ndarray, shape (n, h+1)
        Access factors, column 0 ignored (always 1).
    capacities : sequence of int
        ``m_1 .. m_h``.
    """
    gamma = np.asarray(gamma, dtype=float)
    caps = tuple(int(c) for c in capacities)
    n, h1 = gamma.shape
    h = h1 - 1
    if len(caps) != h:
        raise CacheModelError("capacities do not match the access-factor columns")
    if sum(caps) > n:
        raise CacheModelError(f"total capacity {sum(caps)} exceeds item count {n}")
    g = gamma[:, 1:].copy()
    with np.errstate(divide="ignore"):
        G = g.max(axis=0)
    if np.any(G <= 0):
        raise CacheModelError("a list has zero access factor for every item")
    g /= G
    logG = np.log(G)
    P, sP, S, sS = _poly_tables(g, caps)
    full = P[n][caps]
    if full <= 0.0:
        raise CacheModelError("capacity exceeds the number of items with positive access factor")
    base = float(np.dot(caps, logG))
    log_E = math.log(full) + sP[n] + base

    with np.errstate(divide="ignore"):
        loo = _coef_product(P[:n], S[1 : n + 1], caps)
        log_loo = np.log(loo) + sP[:n] + sS[1 : n + 1] + base
        minus = np.full((h, n), -np.inf)
        for l in range(h):
            t = list(caps)
            t[l] -= 1
            vals = _coef_product(P[:n], S[1 : n + 1], tuple(t))
            minus[l] = np.log(vals) + sP[:n] + sS[1 : n + 1] + float(np.dot(t, logG))
    return NormalizingConstants(log_E, log_loo, minus)


@dataclass(frozen=True, eq=False)
class CacheMarginals:
    """Solved stationary quantities of a list cache.

    ``pi[k, l]`` is the probability that item ``k`` sits in list ``l``;
    ``pi[:, 0]`` are the per-item miss ratios.
    """

    pi: np.ndarray
    miss_rates: np.ndarray
    total_miss_rate: float
    log_E: float
    log_E_loo: np.ndarray

    @property
    def miss_ratio(self) -> np.ndarray:
        return self.pi[:, 0]

    @property
    def E(self) -> float:
        return float(np.exp(self.log_E))

    @property
    def E_loo(self) -> np.ndarray:
        return np.exp(self.log_E_loo)


def _miss_rates(spec: ListCacheSpec, pi: np.ndarray) -> np.ndarray:
    return spec.rates[:, :, 0] * pi[None, :, 0] * (1.0 - spec.access[:, :, 0, 0])


def cache_marginals(spec: ListCacheSpec, check: float = 1e-8) -> CacheMarginals:
    """Item/list marginals ``pi[k, l] = gamma[k, l] E_k(m - 1_l) / E(m)``.

    Raises
    ------
    NumericalInstabilityError
        If the per-item probabilities fail to sum to one within ``check``.
    """
    gamma = access_factors(spec)
    nc = normalizing_constant(gamma, spec.capacities)
    pi = np.empty_like(gamma)
    pi[:, 0] = np.exp(nc.log_E_loo - nc.log_E)
    with np.errstate(invalid="ignore"):
        for l in range(1, spec.h + 1):
            pi[:, l] = np.where(gamma[:, l] > 0, gamma[:, l] * np.exp(nc.log_E_loo_minus[l - 1] - nc.log_E), 0.0)
    err = float(np.max(np.abs(pi.sum(axis=1) - 1.0)))
    if not err <= check:
        raise NumericalInstabilityError("normalizing-constant ratios lost precision", err / max(check, 1e-300))
    mr = _miss_rates(spec, pi)
    return CacheMarginals(pi, mr, float(mr.sum()), nc.log_E, nc.log_E_loo)


def isolated_cache_hit_miss(spec: ListCacheSpec, class_rates: Optional[np.ndarray] = None):
    """Per-stream hit and miss probabilities of the cache in isolation.

    Each stream's popularity is its per-item rate vector normalised; when
    ``class_rates`` is given the streams are rescaled to those totals.

    Returns
    -------
    p_hit, p_miss : ndarray, shape (u,)
    marginals : CacheMarginals
    """
    base = spec.rates[:, :, 0]
    totals = base.sum(axis=1)
    if np.any(totals <= 0):
        raise CacheModelError("zero total arrival rate: hit probability is undefined")
    pop = base / totals[:, None]
    if class_rates is not None:
        cr = np.asarray(class_rates, dtype=float).reshape(-1)
        if np.any(cr < 0):
            raise CacheModelError("arrival rates must be >= 0")
        if np.all(cr == 0):
            raise CacheModelError("zero total arrival rate: hit probability is undefined")
        spec = spec.with_rates(cr[:, None] * pop)
    marg = cache_marginals(spec)
    p_miss = pop @ marg.pi[:, 0]
    p_hit = 1.0 - p_miss
    return p_hit, p_miss, marg
