"""Collective animal behavior (CAB) multimodal optimizer with its benchmark suite.

The optimizer lives in :mod:`cabopt.core`, the benchmark functions in
:mod:`cabopt.objectives`, the brute-force optima catalogs in
:mod:`cabopt.oracle`, run scoring in :mod:`cabopt.metrics` and the
experiment runner in :mod:`cabopt.harness`.
"""

from .core import (
    CabParams,
    CabResult,
    ConfigurationError,
    FixedIterations,
    Individual,
    Plateau,
    SearchBounds,
    dominance_radius,
    extract_optima,
    run,
)
from .harness import ExperimentConfig, FixedStop, PlateauStop, run_experiment
from .metrics import aggregate, count_found, mean_distance
from .objectives import FUNCTION_IDS, CountingObjective, evaluate, spec_of
from .oracle import OptimaCatalog, build_catalog, ensure_catalog

__version__ = "0.1.0"

__all__ = [
    "FUNCTION_IDS",
    "CabParams",
    "CabResult",
    "ConfigurationError",
    "CountingObjective",
    "ExperimentConfig",
    "FixedIterations",
    "FixedStop",
    "Individual",
    "OptimaCatalog",
    "Plateau",
    "PlateauStop",
    "SearchBounds",
    "aggregate",
    "build_catalog",
    "count_found",
    "dominance_radius",
    "ensure_catalog",
    "evaluate",
    "extract_optima",
    "mean_distance",
    "run",
    "run_experiment",
    "spec_of",
]
