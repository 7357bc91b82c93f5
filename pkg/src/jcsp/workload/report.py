"""Distribution summaries of a workload's services."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .spec import WorkloadError, WorkloadSpec

CDF_COLUMNS = ("percentile", "value", "cdf")
PERCENTILES = tuple(range(0, 101, 5))


@dataclass(frozen=True)
class CdfTable:
    """Percentiles of one per-service quantity.

    ``cdf[i]`` is the fraction of services whose value is at most
    ``values[i]``.
    """

    name: str
    percentiles: tuple[float, ...]
    values: tuple[float, ...]
    cdf: tuple[float, ...]

    def value_at(self, pct: float) -> float:
        return self.values[self.percentiles.index(pct)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CDF_COLUMNS)
        for row in zip(self.percentiles, self.values, self.cdf):
            w.writerow([f"{row[0]:g}", repr(row[1]), repr(row[2])])
        return buf.getvalue()


def cdf_table(name: str, data, percentiles=PERCENTILES) -> CdfTable:
    x = np.sort(np.asarray(data, dtype=float))
    if x.size == 0:
        raise WorkloadError("cannot summarize an empty sample")
    vals = np.percentile(x, percentiles)
    frac = np.searchsorted(x, vals, side="right") / x.size
    return CdfTable(name, tuple(float(p) for p in percentiles), tuple(float(v) for v in vals),
                    tuple(float(f) for f in frac))


def cdf_report(workload: WorkloadSpec, percentiles=PERCENTILES) -> dict[str, CdfTable]:
    """CDF tables of mean execution time (s), memory (MB) and invocation rate
    (1/s) over the services of ``workload``."""
    if not workload.services:
        raise WorkloadError("workload has no services")
    s = workload.services
    return {
        "execution-time": cdf_table("execution-time", [v.service_time.mean for v in s], percentiles),
        "memory": cdf_table("memory", [v.memory_mb for v in s], percentiles),
        "invocation-rate": cdf_table("invocation-rate", [v.rate for v in s], percentiles),
    }
