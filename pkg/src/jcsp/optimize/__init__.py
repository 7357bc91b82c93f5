"""Placement and joint cache-allocation search, baselines and oracles."""
from .baselines import baseline_no_cache, baseline_prefetch_all
from .evaluate import (
    DEFAULT_ORACLE_LIMIT,
    Evaluator,
    InstanceTooLargeError,
    evaluate_placement,
    exhaustive_jcsp_oracle,
    exhaustive_placement_oracle,
)
from .ga import (
    FITNESS_COLUMNS,
    GaParams,
    GaRun,
    JcspResult,
    PlacementResult,
    decode_allocation,
    ga_optimize_jcsp,
    ga_optimize_placement,
    run_ga,
)
from .odtsc import OdtscResult, Schedule, exhaustive_schedule_oracle, list_schedule, odtsc_style_baseline

__all__ = [
    "DEFAULT_ORACLE_LIMIT",
    "Evaluator",
    "FITNESS_COLUMNS",
    "GaParams",
    "GaRun",
    "InstanceTooLargeError",
    "JcspResult",
    "OdtscResult",
    "PlacementResult",
    "Schedule",
    "baseline_no_cache",
    "baseline_prefetch_all",
    "decode_allocation",
    "evaluate_placement",
    "exhaustive_jcsp_oracle",
    "exhaustive_placement_oracle",
    "exhaustive_schedule_oracle",
    "ga_optimize_jcsp",
    "ga_optimize_placement",
    "list_schedule",
    "odtsc_style_baseline",
    "run_ga",
]
