"""Workload descriptions: synthetic generators, trace ingestion and summaries."""
from .report import CdfTable, cdf_report, cdf_table
from .spec import (
    WORKLOAD_SCHEMA,
    ItemCatalog,
    ServiceSpec,
    UserGroup,
    WorkloadError,
    WorkloadSpec,
    load_workload,
    save_workload,
)
from .synth import SLOTS_PER_NODE, item_catalogs, synth_catalog, synth_chain_instance, synth_workload
from .trace import DEFAULT_HORIZON_DAYS, TraceRecord, ingest_trace, read_trace, workload_from_records

__all__ = [
    "CdfTable",
    "DEFAULT_HORIZON_DAYS",
    "ItemCatalog",
    "SLOTS_PER_NODE",
    "ServiceSpec",
    "TraceRecord",
    "UserGroup",
    "WORKLOAD_SCHEMA",
    "WorkloadError",
    "WorkloadSpec",
    "cdf_report",
    "cdf_table",
    "ingest_trace",
    "item_catalogs",
    "load_workload",
    "read_trace",
    "save_workload",
    "synth_catalog",
    "synth_chain_instance",
    "synth_workload",
    "workload_from_records",
]
