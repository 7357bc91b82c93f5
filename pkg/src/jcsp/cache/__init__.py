from .listcache import (
    CacheMarginals,
    CacheModelError,
    ListCacheSpec,
    NormalizingConstants,
    NumericalInstabilityError,
    access_factors,
    cache_marginals,
    isolated_cache_hit_miss,
    normalizing_constant,
)
from .oracle import brute_force_cache_oracle

__all__ = [
    "CacheMarginals",
    "CacheModelError",
    "ListCacheSpec",
    "NormalizingConstants",
    "NumericalInstabilityError",
    "access_factors",
    "brute_force_cache_oracle",
    "cache_marginals",
    "isolated_cache_hit_miss",
    "normalizing_constant",
]
