"""Seeded random instances shared by unit and acceptance tests."""
import numpy as np

from jcsp.cache import ListCacheSpec


def single_list_specs(count=200, seed=7, max_items=10, max_capacity=5):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, max_items + 1))
        m = int(rng.integers(1, min(n, max_capacity) + 1))
        rates = rng.lognormal(0.0, 1.0, n)
        yield ListCacheSpec.single_list(rates, m)


def chain_specs(count=50, seed=11, max_items=6):
    """Two-list chains 0 -> 1 -> 2 with list-dependent rates."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, max_items + 1))
        m1 = int(rng.integers(1, n))
        m2 = int(rng.integers(1, n - m1 + 1))
        rates = rng.lognormal(0.0, 1.0, (1, n, 3))
        yield ListCacheSpec.build(n, (m1, m2), (0, 1), rates)


def delay_queue_networks(count=100, seed=3, max_population=20):
    """Single-class networks with one delay and one to three PS queues."""
    from jcsp.solver import ClosedNetwork

    rng = np.random.default_rng(seed)
    for _ in range(count):
        K = int(rng.integers(1, 4))
        yield ClosedNetwork.single_class(int(rng.integers(1, max_population + 1)), float(rng.uniform(0.1, 5.0)),
                                         rng.uniform(0.05, 1.0, K))


def caching_submodels(count=100, seed=5, zero_delays=False):
    """Random (upper, lower) caching sub-model pairs."""
    from jcsp.model.types import CacheConfig, CacheList, Popularity
    from jcsp.solver import CacheLower, CacheUpper

    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, n + 1))
        eta = float(rng.uniform(0.0, 1.5))
        cfg = CacheConfig(n, (CacheList(m, 0),), Popularity.zipf(eta))
        u = int(rng.integers(1, 3))
        pops = rng.dirichlet(np.ones(n), u)
        mix = rng.dirichlet(np.ones(u))
        K = int(rng.integers(1, 3))
        if zero_delays:
            hit, miss, hd, md = np.zeros(K), np.zeros(K), 0.0, 0.0
        else:
            hit, miss = rng.uniform(0.0, 0.3, K), rng.uniform(0.1, 1.0, K)
            hd, md = float(rng.uniform(0, 0.1)), float(rng.uniform(0, 0.5))
        lower = CacheLower(int(rng.integers(1, 7)), float(rng.uniform(0.1, 2.0)), hit, miss, ("ps",) * K,
                           (1,) * K, hd, md)
        yield CacheUpper(cfg, pops, mix), lower


def write_trace(root, functions=(("a1", "f1", (1000, 440), (10.0, 500.0, 900.0)),),
                memory=(("a1", (100.0, 150.0, 300.0)),)):
    """Three trace CSVs: ``functions`` rows are (app, function, bin counts,
    (min, avg, max) duration in ms); ``memory`` rows (app, (pct1, avg, max))."""
    from pathlib import Path

    root = Path(root)
    bins = len(functions[0][2])
    inv = ["HashOwner,HashApp,HashFunction,Trigger," + ",".join(str(i + 1) for i in range(bins))]
    dur = ["HashOwner,HashApp,HashFunction,Average,Count,Minimum,Maximum"]
    for app, fn, counts, (lo, avg, hi) in functions:
        inv.append(f"o,{app},{fn},http," + ",".join(str(c) for c in counts))
        dur.append(f"o,{app},{fn},{avg},{sum(counts)},{lo},{hi}")
    mem = ["HashOwner,HashApp,SampleCount,AverageAllocatedMb,AverageAllocatedMb_pct1,AverageAllocatedMb_pct100"]
    for app, (lo, avg, hi) in memory:
        mem.append(f"o,{app},10,{avg},{lo},{hi}")
    paths = []
    for name, lines in (("invocations.csv", inv), ("durations.csv", dur), ("memory.csv", mem)):
        (root / name).write_text("\n".join(lines) + "\n")
        paths.append(root / name)
    return tuple(paths)
