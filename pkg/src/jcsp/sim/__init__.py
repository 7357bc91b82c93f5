from .compare import ComparisonRow, ComparisonTable, EntityMismatchError, compare_residence
from .engine import Engine, PsStation, SimulationError, ThreadPool
from .simulate import SimCacheRow, SimOptions, SimResult, SimRow, simulate

__all__ = [
    "ComparisonRow",
    "ComparisonTable",
    "Engine",
    "EntityMismatchError",
    "PsStation",
    "SimCacheRow",
    "SimOptions",
    "SimResult",
    "SimRow",
    "SimulationError",
    "ThreadPool",
    "compare_residence",
    "simulate",
]
