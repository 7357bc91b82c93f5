"""Workload description shared by the edge-model builder and the optimizer."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model.types import PhaseType, Popularity

WORKLOAD_SCHEMA = "jcsp-workload/1"


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceSpec:
    """A service: invocation rate (1/s), service-time distribution and
    memory footprint (MB)."""

    id: str
    rate: float
    service_time: PhaseType
    memory_mb: float = 0.0


@dataclass(frozen=True)
class ItemCatalog:
    """Items backing one service. All items have the same size."""

    service: str
    count: int
    total_size_gb: float
    popularity: Popularity = Popularity.uniform()

    @property
    def item_size_mb(self) -> float:
        return self.total_size_gb * 1024.0 / self.count


@dataclass(frozen=True)
class UserGroup:
    """``count`` users sharing one request-probability vector over services."""

    count: int
    probabilities: tuple[float, ...]


@dataclass(frozen=True)
class WorkloadSpec:
    """Users, services, item catalogs and node cache capacities.

    Hit and miss fetch delays follow from the item size: a hit reads the item
    locally at ``local_bandwidth_mbps``; a miss pays ``origin_latency`` plus a
    transfer at ``origin_bandwidth_mbps``.
    """

    services: tuple[ServiceSpec, ...]
    groups: tuple[UserGroup, ...]
    items: tuple[ItemCatalog, ...] = ()
    node_capacities_mb: tuple[float, ...] = ()
    item_size_mb: float = 15.0
    think_time: float = 1.0
    local_bandwidth_mbps: float = 1000.0
    origin_bandwidth_mbps: float = 100.0
    origin_latency: float = 0.05

    def __post_init__(self):
        ids = [s.id for s in self.services]
        if len(set(ids)) != len(ids):
            raise WorkloadError("service ids must be unique")
        for s in self.services:
            if not s.rate >= 0:
                raise WorkloadError(f"service {s.id!r}: rate must be >= 0")
        for g, grp in enumerate(self.groups):
            p = np.asarray(grp.probabilities, dtype=float)
            if grp.count < 1 or len(p) != len(ids):
                raise WorkloadError(f"user group {g}: need count >= 1 and one probability per service")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise WorkloadError(f"user group {g}: request probabilities must be >= 0 and sum to 1")
        for it in self.items:
            if it.service not in ids:
                raise WorkloadError(f"item catalog names unknown service {it.service!r}")
            if it.count < 1 or not it.total_size_gb > 0:
                raise WorkloadError(f"item catalog of {it.service!r}: need count >= 1 and size > 0")
            if it.popularity.kind == "zipf" and it.popularity.eta < 0:
                raise WorkloadError(f"item catalog of {it.service!r}: Zipf eta must be >= 0")
        if any(not q > 0 for q in self.node_capacities_mb):
            raise WorkloadError("node cache capacities must be > 0")
        if self.think_time < 0 or not self.item_size_mb > 0:
            raise WorkloadError("think time must be >= 0 and item size > 0")

    @property
    def users(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def service_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.services)

    def service_index(self, sid: str) -> int:
        return self.service_ids.index(sid)

    def catalog_of(self, sid: str) -> Optional[ItemCatalog]:
        for it in self.items:
            if it.service == sid:
                return it
        return None

    def hit_delay(self, sid: str) -> float:
        it = self.catalog_of(sid)
        return 0.0 if it is None else it.item_size_mb / self.local_bandwidth_mbps

    def miss_delay(self, sid: str) -> float:
        it = self.catalog_of(sid)
        return 0.0 if it is None else self.origin_latency + it.item_size_mb / self.origin_bandwidth_mbps

    def node_slots(self) -> tuple[int, ...]:
        """Cache capacity of each node in item slots."""
        return tuple(int(math.floor(q / self.item_size_mb + 1e-9)) for q in self.node_capacities_mb)

    # -- documents ---------------------------------------------------------
    def to_dict(self) -> dict:
        def dist(d: PhaseType) -> dict:
            return {"kind": d.kind, "mean": d.mean, "scv": d.scv}

        def pop(p: Popularity) -> dict:
            return {"kind": "zipf", "eta": p.eta} if p.kind == "zipf" else {"kind": "custom", "weights": list(p.weights)}

        return {
            "schema": WORKLOAD_SCHEMA,
            "services": [{"id": s.id, "rate": s.rate, "service-time": dist(s.service_time), "memory-mb": s.memory_mb}
                         for s in self.services],
            "groups": [{"count": g.count, "probabilities": list(g.probabilities)} for g in self.groups],
            "items": [{"service": i.service, "count": i.count, "total-size-gb": i.total_size_gb,
                       "popularity": pop(i.popularity)} for i in self.items],
            "node-capacities-mb": list(self.node_capacities_mb),
            "item-size-mb": self.item_size_mb,
            "think-time": self.think_time,
            "local-bandwidth-mbps": self.local_bandwidth_mbps,
            "origin-bandwidth-mbps": self.origin_bandwidth_mbps,
            "origin-latency": self.origin_latency,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WorkloadSpec":
        if doc.get("schema") != WORKLOAD_SCHEMA:
            raise WorkloadError(f"expected schema {WORKLOAD_SCHEMA!r}, got {doc.get('schema')!r}")
        try:
            services = tuple(
                ServiceSpec(s["id"], float(s["rate"]),
                            PhaseType(s["service-time"]["kind"], float(s["service-time"]["mean"]),
                                      float(s["service-time"]["scv"])),
                            float(s.get("memory-mb", 0.0)))
                for s in doc["services"])
            groups = tuple(UserGroup(int(g["count"]), tuple(float(p) for p in g["probabilities"]))
                           for g in doc["groups"])
            items = []
            for i in doc.get("items", []):
                p = i.get("popularity", {"kind": "zipf", "eta": 0.0})
                popularity = Popularity.zipf(p["eta"]) if p["kind"] == "zipf" else Popularity.custom(p["weights"])
                items.append(ItemCatalog(i["service"], int(i["count"]), float(i["total-size-gb"]), popularity))
            return cls(services, groups, tuple(items), tuple(float(q) for q in doc.get("node-capacities-mb", [])),
                       float(doc.get("item-size-mb", 15.0)), float(doc.get("think-time", 1.0)),
                       float(doc.get("local-bandwidth-mbps", 1000.0)), float(doc.get("origin-bandwidth-mbps", 100.0)),
                       float(doc.get("origin-latency", 0.05)))
        except (KeyError, TypeError) as exc:
            raise WorkloadError(f"malformed workload document: {exc}") from exc


def save_workload(spec: WorkloadSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True)


def load_workload(text: str) -> WorkloadSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"line {exc.lineno}: {exc.msg}") from exc
    return WorkloadSpec.from_dict(doc)
