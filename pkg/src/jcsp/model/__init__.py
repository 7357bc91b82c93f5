"""Layered queueing model types, documents, validation and edge-system
translation."""
from .edge import (
    AllocationError,
    CacheAllocation,
    EmptyFeasibleSetError,
    InfeasibleDecisionError,
    PlacementDecision,
    ServiceCatalog,
    Workflow,
    allocation_memory_mb,
    apply_cache_allocation,
    build_edge_model,
    catalog_from_dict,
    catalog_to_dict,
    decision_from_dict,
    decision_to_dict,
    feasible_nodes,
    largest_remainder,
)
from .io import ModelError, load_model, model_from_dict, model_to_dict, read_model, save_model, write_model
from .types import (
    INF,
    PS,
    Activity,
    CacheConfig,
    CacheList,
    Call,
    Entry,
    LqnModel,
    ModelBuilder,
    PhaseType,
    Popularity,
    PrecedenceEdge,
    Processor,
    Task,
)
from .validate import Diagnostic, validate_model

__all__ = [
    "INF",
    "PS",
    "Activity",
    "AllocationError",
    "CacheAllocation",
    "CacheConfig",
    "CacheList",
    "Call",
    "Diagnostic",
    "EmptyFeasibleSetError",
    "Entry",
    "InfeasibleDecisionError",
    "LqnModel",
    "ModelBuilder",
    "ModelError",
    "PhaseType",
    "PlacementDecision",
    "Popularity",
    "PrecedenceEdge",
    "Processor",
    "ServiceCatalog",
    "Task",
    "Workflow",
    "allocation_memory_mb",
    "apply_cache_allocation",
    "build_edge_model",
    "catalog_from_dict",
    "catalog_to_dict",
    "decision_from_dict",
    "decision_to_dict",
    "feasible_nodes",
    "largest_remainder",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "read_model",
    "save_model",
    "validate_model",
    "write_model",
]
