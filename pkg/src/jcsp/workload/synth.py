"""Seeded synthetic workloads and service catalogs.

Execution times, memory footprints and invocation rates are drawn from
lognormal laws whose medians and spreads are shaped like public serverless
traces: half of the functions run for less than 0.7 s on average, mean
execution times are capped at 3 s, and invocation rates are heavy-tailed.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..model.edge import ServiceCatalog, Workflow
from ..model.types import PhaseType, Popularity
from .spec import ItemCatalog, ServiceSpec, UserGroup, WorkloadError, WorkloadSpec

SLOTS_PER_NODE = 50

# lognormal (median, sigma) of the per-service draws
EXEC_TIME = (0.45, 0.8)
MEMORY_MB = (150.0, 0.5)
INVOCATION_RATE = (0.1, 1.0)
MAX_EXEC_TIME = 3.0


def _lognormal(rng: np.random.Generator, median: float, sigma: float, size: int) -> np.ndarray:
    return median * np.exp(sigma * rng.standard_normal(size))


def item_catalogs(service_ids, p: float, item_size_mb: float, eta: float,
                  rng: np.random.Generator) -> tuple[ItemCatalog, ...]:
    """One catalog per service with total size uniform on ``[p/2, 3p/2]`` GB,
    rounded to whole items of ``item_size_mb``."""
    if not p > 0 or not item_size_mb > 0:
        raise WorkloadError("total item size p and item size must be > 0")
    if eta < 0:
        raise WorkloadError("Zipf eta must be >= 0")
    sizes = p * rng.uniform(0.5, 1.5, len(service_ids))
    out = []
    for sid, gb in zip(service_ids, sizes):
        n = max(1, int(round(gb * 1024.0 / item_size_mb)))
        out.append(ItemCatalog(sid, n, n * item_size_mb / 1024.0, Popularity.zipf(eta)))
    return tuple(out)


def synth_workload(M: int, N: int, C: int, q: float = 750.0, p: float = 1.0, eta: float = 1.0,
                   seed: int = 0, think_time: float = 1.0,
                   slots_per_node: int = SLOTS_PER_NODE) -> WorkloadSpec:
    """Synthetic workload for ``M`` nodes, ``N`` users and ``C`` services.

    Parameters
    ----------
    q : float
        Cache capacity of every node (MB).
    p : float
        Average total size of the items of a service (GB).
    eta : float
        Zipf exponent of item popularity.
    slots_per_node : int
        Items of size ``q / slots_per_node`` fill one node cache.

    Returns
    -------
    WorkloadSpec
        One user group whose request probabilities are proportional to the
        service invocation rates.
    """
    if M < 1 or N < 1 or C < 1:
        raise WorkloadError("M, N and C must be >= 1")
    if not q > 0:
        raise WorkloadError("node cache capacity q must be > 0")
    if slots_per_node < 1:
        raise WorkloadError("slots per node must be >= 1")
    rng = np.random.default_rng(seed)
    exec_t = np.minimum(_lognormal(rng, *EXEC_TIME, C), MAX_EXEC_TIME)
    mem = _lognormal(rng, *MEMORY_MB, C)
    rates = _lognormal(rng, *INVOCATION_RATE, C)
    ids = tuple(f"s{c}" for c in range(C))
    services = tuple(ServiceSpec(ids[c], float(rates[c]), PhaseType.exponential(float(exec_t[c])), float(mem[c]))
                     for c in range(C))
    probs = rates / rates.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    size = q / slots_per_node
    items = item_catalogs(ids, p, size, eta, rng)
    return WorkloadSpec(services, (UserGroup(N, tuple(float(v) for v in probs)),), items,
                        (float(q),) * M, size, think_time)


def synth_catalog(workload: WorkloadSpec, seed: int = 0, density: float = 0.5,
                  speed: tuple[float, float] = (0.5, 1.5)) -> ServiceCatalog:
    """Service catalog with one single-job workflow per service.

    Each node provisions each service with probability ``density`` (every
    service on at least one node). Node ``m`` runs at a speed factor drawn
    uniformly from ``speed``, scaling the mean execution times.
    """
    M = len(workload.node_capacities_mb)
    if M < 1:
        raise WorkloadError("the workload declares no nodes")
    if not 0 < density <= 1:
        raise WorkloadError("placement density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    C = len(workload.services)
    P = (rng.random((M, C)) < density).astype(int)
    for k in np.flatnonzero(~P.any(axis=0)):
        P[rng.integers(M), k] = 1
    factor = rng.uniform(*speed, M)
    means = np.array([s.service_time.mean for s in workload.services])
    T = np.outer(factor, means)
    flows = []
    for g, grp in enumerate(workload.groups):
        flows += [Workflow((k,), float(grp.probabilities[k]), g) for k in range(C)]
    return ServiceCatalog(tuple(map(tuple, P.tolist())), tuple(map(tuple, T.tolist())), tuple(range(C)),
                          tuple(flows))


def synth_chain_instance(M: int, N: int, C: int, K: Optional[int] = None, seed: int = 0,
                         distribution: str = "exponential", scv: float = 1.0, density: float = 0.7,
                         max_chain: int = 3, think_time: float = 1.0) -> tuple[ServiceCatalog, WorkloadSpec]:
    """Placement instance without item catalogs: ``K`` jobs (default ``C``)
    grouped into chain workflows of length 1..``max_chain``.

    Job ``k`` requests service ``k mod C``. Nodes provision each job with
    probability ``density`` and run at a speed factor in ``[0.5, 1.5]``.
    """
    K = C if K is None else K
    if M < 1 or N < 1 or C < 1 or K < 1 or max_chain < 1:
        raise WorkloadError("M, N, C, K and the chain length must be >= 1")
    rng = np.random.default_rng(seed)
    exec_t = np.minimum(_lognormal(rng, *EXEC_TIME, C), MAX_EXEC_TIME)
    services = tuple(ServiceSpec(f"s{c}", 1.0, PhaseType.exponential(float(exec_t[c]))) for c in range(C))
    job_service = tuple(k % C for k in range(K))
    chains, k = [], 0
    while k < K:
        n = int(rng.integers(1, max_chain + 1))
        chains.append(tuple(range(k, min(k + n, K))))
        k += n
    weights = rng.uniform(0.5, 1.5, len(chains))
    weights /= weights.sum()
    flows = tuple(Workflow(ch, float(w)) for ch, w in zip(chains, weights))
    P = (rng.random((M, K)) < density).astype(int)
    for j in np.flatnonzero(~P.any(axis=0)):
        P[rng.integers(M), j] = 1
    factor = rng.uniform(0.5, 1.5, M)
    T = np.outer(factor, exec_t[list(job_service)])
    catalog = ServiceCatalog(tuple(map(tuple, P.tolist())), tuple(map(tuple, T.tolist())), job_service, flows,
                             distribution, scv)
    # request probabilities only matter for the services' share; workflows carry the routing
    share = np.bincount(job_service, minlength=C).astype(float)
    share /= share.sum()
    share[-1] = 1.0 - share[:-1].sum()
    workload = WorkloadSpec(services, (UserGroup(N, tuple(float(v) for v in share)),), (), (),
                            think_time=think_time)
    return catalog, workload
