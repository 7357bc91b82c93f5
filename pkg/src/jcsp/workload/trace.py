"""Ingestion of the public serverless-function trace CSV schema.

Three files are joined: invocation counts per function per time bin,
per-function duration statistics (milliseconds) and per-application memory
statistics (MB). Column names default to the published schema and can be
remapped.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..model.types import PhaseType
from .spec import ServiceSpec, UserGroup, WorkloadError, WorkloadSpec
from .synth import SLOTS_PER_NODE, item_catalogs

DEFAULT_HORIZON_DAYS = 14.0

DEFAULT_COLUMNS = {
    "app": "HashApp",
    "function": "HashFunction",
    "duration-avg": "Average",
    "duration-min": "Minimum",
    "duration-max": "Maximum",
    "memory-avg": "AverageAllocatedMb",
    "memory-low": "AverageAllocatedMb_pct1",
    "memory-max": "AverageAllocatedMb_pct100",
}

# non-bin columns of the invocation file
_INVOCATION_META = {"HashOwner", "HashApp", "HashFunction", "Trigger"}

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TraceRecord:
    """One function of the trace.

    Durations are in seconds as (min, avg, max); memory is the owning
    application's (1st percentile, avg, max) in MB.
    """

    app: str
    function: str
    counts: tuple[int, ...]
    duration: tuple[float, float, float]
    memory: tuple[float, float, float]

    def __post_init__(self):
        lo, avg, hi = self.duration
        if not lo <= avg <= hi:
            raise WorkloadError(f"function {self.function}: duration needs min <= avg <= max")
        lo, avg, hi = self.memory
        if not lo <= avg <= hi:
            raise WorkloadError(f"function {self.function}: memory needs 1st percentile <= avg <= max")
        if any(c < 0 for c in self.counts):
            raise WorkloadError(f"function {self.function}: invocation counts must be >= 0")

    @property
    def invocations(self) -> int:
        return sum(self.counts)


def load_column_mapping(path: Optional[PathLike]) -> dict:
    cols = dict(DEFAULT_COLUMNS)
    if path is not None:
        extra = json.loads(Path(path).read_text())
        unknown = set(extra) - set(cols)
        if unknown:
            raise WorkloadError(f"unknown column keys in mapping: {sorted(unknown)}")
        cols.update(extra)
    return cols


def _rows(path: PathLike):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise WorkloadError(f"{path}: empty file")
        # row 1 is the header
        for i, row in enumerate(reader, start=2):
            yield i, row, reader.fieldnames


def _num(path, i, row, col, cast=float):
    try:
        return cast(row[col])
    except KeyError:
        raise WorkloadError(f"{path}: missing column {col!r}") from None
    except (TypeError, ValueError):
        raise WorkloadError(f"{path} row {i}: column {col!r} is not a number: {row.get(col)!r}") from None


def read_trace(invocations: PathLike, durations: PathLike, memory: PathLike,
               columns: Optional[dict] = None) -> list[TraceRecord]:
    """Join the three trace files into one record per function.

    Raises
    ------
    WorkloadError
        On malformed rows (with the row number), violated percentile
        ordering, or functions and applications missing from a file.
    """
    cols = dict(DEFAULT_COLUMNS if columns is None else columns)
    app_c, fn_c = cols["app"], cols["function"]

    counts: dict[tuple[str, str], tuple[int, ...]] = {}
    for i, row, header in _rows(invocations):
        bins = [h for h in header if h not in _INVOCATION_META and h not in (app_c, fn_c)]
        key = (row.get(app_c), row.get(fn_c))
        if None in key:
            raise WorkloadError(f"{invocations} row {i}: missing app or function id")
        c = tuple(_num(invocations, i, row, b, lambda v: int(float(v or 0))) for b in bins)
        if any(v < 0 for v in c):
            raise WorkloadError(f"{invocations} row {i}: negative invocation count")
        counts[key] = tuple(a + b for a, b in zip(counts[key], c)) if key in counts else c

    dur: dict[tuple[str, str], tuple[float, float, float]] = {}
    for i, row, _ in _rows(durations):
        key = (row.get(app_c), row.get(fn_c))
        lo, avg, hi = (_num(durations, i, row, cols[k]) / 1000.0
                       for k in ("duration-min", "duration-avg", "duration-max"))
        if not lo <= avg <= hi:
            raise WorkloadError(f"{durations} row {i}: duration needs min <= avg <= max")
        dur[key] = (lo, avg, hi)

    mem: dict[str, tuple[float, float, float]] = {}
    for i, row, _ in _rows(memory):
        lo, avg, hi = (_num(memory, i, row, cols[k]) for k in ("memory-low", "memory-avg", "memory-max"))
        if not lo <= avg <= hi:
            raise WorkloadError(f"{memory} row {i}: memory needs 1st percentile <= avg <= max")
        mem[row.get(app_c)] = (lo, avg, hi)

    missing = sorted(k[1] for k in counts if k not in dur)
    if missing:
        raise WorkloadError(f"functions without duration statistics: {missing[:5]}"
                            + (" ..." if len(missing) > 5 else ""))
    apps = sorted({k[0] for k in counts if k[0] not in mem})
    if apps:
        raise WorkloadError(f"applications without memory statistics: {apps[:5]}"
                            + (" ..." if len(apps) > 5 else ""))
    return [TraceRecord(a, f, counts[(a, f)], dur[(a, f)], mem[a]) for a, f in sorted(counts)]


def workload_from_records(records: list[TraceRecord], users: int = 25, horizon_days: float = DEFAULT_HORIZON_DAYS,
                          sample: Optional[int] = None, seed: int = 0, nodes: int = 0, q: float = 750.0,
                          p: Optional[float] = None, eta: float = 1.0, think_time: float = 1.0,
                          slots_per_node: int = SLOTS_PER_NODE) -> WorkloadSpec:
    """Turn trace records into a workload.

    Rates are total invocations over the horizon, service times exponential
    with the mean duration, memory the application's average. ``sample``
    keeps that many functions chosen by ``seed``. Item catalogs are attached
    only when ``p`` is given.
    """
    if not horizon_days > 0:
        raise WorkloadError("trace horizon must be > 0")
    recs = [r for r in records if r.invocations > 0]
    if not recs:
        raise WorkloadError("no function in the trace was invoked")
    if sample is not None and sample < len(recs):
        keep = np.sort(np.random.default_rng(seed).choice(len(recs), size=sample, replace=False))
        recs = [recs[i] for i in keep]
    horizon = horizon_days * 86400.0
    services = tuple(
        ServiceSpec(r.function, r.invocations / horizon, PhaseType.exponential(max(r.duration[1], 1e-9)), r.memory[1])
        for r in recs)
    rates = np.array([s.rate for s in services])
    probs = rates / rates.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    size = q / slots_per_node
    items = ()
    if p is not None:
        items = item_catalogs([s.id for s in services], p, size, eta, np.random.default_rng(seed))
    return WorkloadSpec(services, (UserGroup(users, tuple(float(v) for v in probs)),), items,
                        (float(q),) * nodes, size, think_time)


def ingest_trace(invocations: PathLike, durations: PathLike, memory: PathLike, mapping: Optional[PathLike] = None,
                 **kwargs) -> WorkloadSpec:
    """Read the three trace CSV files and build a workload; keyword arguments
    go to :func:`workload_from_records`."""
    return workload_from_records(read_trace(invocations, durations, memory, load_column_mapping(mapping)), **kwargs)
