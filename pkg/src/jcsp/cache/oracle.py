"""Enumeration oracle for list-cache marginals (small instances only)."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .listcache import CacheMarginals, CacheModelError, ListCacheSpec, _miss_rates, access_factors

MAX_ITEMS = 12
MAX_STATES = 10**6


def _state_count(n: int, caps) -> int:
    rest = n - sum(caps)
    return math.factorial(n) // (math.prod(math.factorial(c) for c in caps) * math.factorial(rest))


def _assignments(items: tuple, caps: tuple):
    """Yield tuples of frozensets, one per list 1..h."""
    if not caps:
        yield ()
        return
    for chosen in itertools.combinations(items, caps[0]):
        rest = tuple(i for i in items if i not in chosen)
        for tail in _assignments(rest, caps[1:]):
            yield (chosen,) + tail


def _constant(gamma: np.ndarray, items: tuple, caps: tuple, acc=None) -> float:
    total = 0.0
    for assign in _assignments(items, caps):
        w = 1.0
        for l, members in enumerate(assign, start=1):
            for k in members:
                w *= gamma[k, l]
        total += w
        if acc is not None:
            for l, members in enumerate(assign, start=1):
                for k in members:
                    acc[k, l] += w
    return total


def brute_force_cache_oracle(spec: ListCacheSpec) -> CacheMarginals:
    """Exact marginals by summing the product form over every assignment of
    items to lists."""
    caps = tuple(spec.capacities)
    if spec.n > MAX_ITEMS or _state_count(spec.n, caps) > MAX_STATES:
        raise CacheModelError(
            f"instance too large for enumeration (n={spec.n}, states={_state_count(spec.n, caps)})"
        )
    gamma = access_factors(spec)
    items = tuple(range(spec.n))
    acc = np.zeros_like(gamma)
    E = _constant(gamma, items, caps, acc)
    if E <= 0:
        raise CacheModelError("capacity exceeds the number of items with positive access factor")
    pi = acc / E
    pi[:, 0] = 1.0 - pi[:, 1:].sum(axis=1)
    E_loo = np.array([_constant(gamma, tuple(i for i in items if i != k), caps) for k in items])
    mr = _miss_rates(spec, pi)
    with np.errstate(divide="ignore"):
        return CacheMarginals(pi, mr, float(mr.sum()), math.log(E), np.log(E_loo))
