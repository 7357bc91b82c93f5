"""Evaluation metrics: average relative gain between two schemes and the
mean absolute percentage error of estimated miss ratios."""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
import numpy as np

from .model.types import LqnModel
from .sim.simulate import SimResult
from .solver.lqn import SolverResult

GAIN_COLUMNS = ("iteration", "baseline", "proposed", "relative-gain")
# cache-task ids of edge models name their node and service
EDGE_CACHE_ID = re.compile(r"C(\d+)_(.+)")
MISS_COLUMNS = ("model", "node", "service", "estimated", "reference", "included", "abs-rel-error")


class MetricError(ValueError):
    pass


def compute_gain(pairs) -> float:
    """Mean over iterations of ``|R(x') - R(x)| / R(x')``.

    Parameters
    ----------
    pairs : iterable of (float, float)
        ``(baseline, proposed)`` response times per iteration.

    Raises
    ------
    MetricError
        If ``pairs`` is empty or a baseline response time is not positive.
    """
    pairs = [(float(b), float(p)) for b, p in pairs]
    if not pairs:
        raise MetricError("no (baseline, proposed) pairs")
    if any(not b > 0 for b, _ in pairs):
        raise MetricError("baseline response times must be > 0")
    return math.fsum(abs(b - p) / b for b, p in pairs) / len(pairs)


def compute_mape(estimates, references, include=None) -> float:
    """Mean of ``|1 - est / ref|`` over the included pairs.

    ``include`` is a boolean mask of the same shape (default: all). Pairs
    left out, such as services nobody requests on a node, do not enter the
    mean's denominator either.

    Raises
    ------
    MetricError
        On shape mismatch, an empty included set or a zero reference.
    """
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(references, dtype=float)
    if est.shape != ref.shape:
        raise MetricError(f"shape mismatch: {est.shape} vs {ref.shape}")
    mask = np.ones(est.shape, bool) if include is None else np.asarray(include, bool)
    if mask.shape != est.shape:
        raise MetricError("include mask must match the estimates")
    e, r = est[mask], ref[mask]
    if e.size == 0:
        raise MetricError("no pairs included")
    if np.any(r == 0):
        raise MetricError("zero reference miss ratio in the included set")
    return math.fsum(np.abs(1.0 - e / r).tolist()) / e.size


@dataclass
class ComparisonReport:
    """Per-iteration response times of a baseline and a proposed scheme."""

    baseline_label: str
    proposed_label: str
    baseline: list = field(default_factory=list)
    proposed: list = field(default_factory=list)

    def add(self, baseline: float, proposed: float) -> None:
        self.baseline.append(float(baseline))
        self.proposed.append(float(proposed))

    @property
    def gain(self) -> float:
        return compute_gain(zip(self.baseline, self.proposed))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GAIN_COLUMNS)
        for i, (b, p) in enumerate(zip(self.baseline, self.proposed)):
            w.writerow([i, repr(b), repr(p), repr(abs(b - p) / b)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"baseline": self.baseline_label, "proposed": self.proposed_label,
                "iterations": len(self.baseline), "gain": self.gain,
                "pairs": [[b, p] for b, p in zip(self.baseline, self.proposed)]}


@dataclass(frozen=True)
class MissRow:
    model: int
    node: str
    service: str
    estimated: float
    reference: float
    included: bool


@dataclass
class ValidationReport:
    """Estimated against reference miss ratios per (model, node, service)."""

    rows: list = field(default_factory=list)

    @property
    def models(self) -> int:
        return len({r.model for r in self.rows})

    @property
    def nodes(self) -> int:
        return len({r.node for r in self.rows})

    @property
    def services(self) -> int:
        return len({r.service for r in self.rows})

    @property
    def included(self) -> int:
        return sum(r.included for r in self.rows)

    @property
    def mape(self) -> float:
        return compute_mape([r.estimated for r in self.rows], [r.reference for r in self.rows],
                            [r.included for r in self.rows])

    def extend(self, other: "ValidationReport") -> None:
        shift = self.models
        self.rows += [MissRow(r.model + shift, r.node, r.service, r.estimated, r.reference, r.included)
                      for r in other.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MISS_COLUMNS)
        for r in self.rows:
            err = repr(abs(1.0 - r.estimated / r.reference)) if r.included else ""
            w.writerow([r.model, r.node, r.service, repr(r.estimated), repr(r.reference), int(r.included), err])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"models": self.models, "nodes": self.nodes, "services": self.services,
                "included": self.included, "mape": self.mape}


def miss_ratio_report(model: LqnModel, estimated: SolverResult, reference: SimResult,
                      index: int = 0, min_requests: int = 1) -> ValidationReport:
    """Pair analytic and simulated miss ratios of every cache in ``model``.

    A cache is excluded when the simulation saw fewer than ``min_requests``
    requests for it or when it can hold every item, since its stationary
    miss ratio is then zero and a relative error is undefined.
    """
    sim = {r.entry: r for r in reference.cache}
    rows = []
    for r in estimated.cache:
        s = sim.get(r.entry)
        cfg = model.task[r.service].cache_spec
        full = cfg is not None and cfg.capacity >= cfg.items
        ok = s is not None and s.requests >= min_requests and not full
        match = EDGE_CACHE_ID.fullmatch(r.service)
        node, service = (f"node{match.group(1)}", match.group(2)) if match else (r.node, r.service)
        rows.append(MissRow(index, node, service, r.p_miss, s.miss if s is not None else float("nan"), ok))
    return ValidationReport(rows)
