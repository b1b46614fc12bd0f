"""Run scoring: optima found (NO), distance to them (DO), and aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ConfigurationError
from .oracle import OptimaCatalog

__all__ = [
    "FOUND_RADIUS",
    "AggregateStats",
    "RunMetrics",
    "aggregate",
    "count_found",
    "mean_distance",
    "match_optima",
]

FOUND_RADIUS = 0.005


@dataclass(frozen=True)
class RunMetrics:
    optima_found: int
    mean_distance: Optional[float]
    evaluations: int
    elapsed_seconds: float
    iterations: int = 0


@dataclass(frozen=True)
class Stat:
    mean: Optional[float]
    std: Optional[float]


@dataclass(frozen=True)
class AggregateStats:
    runs: int
    optima_found: Stat
    mean_distance: Stat
    evaluations: Stat
    elapsed_seconds: Stat
    iterations: Stat
    success_rate: float


def _positions(population) -> np.ndarray:
    if len(population) == 0:
        return np.empty((0, 0))
    first = population[0]
    if hasattr(first, "position"):
        return np.array([ind.position for ind in population], dtype=float)
    return np.atleast_2d(np.asarray(population, dtype=float))


def match_optima(population, catalog: OptimaCatalog):
    """Closest individual distance for every catalog optimum within reach.

    Returns ``(found_index, distance)``: catalog indices that have an
    individual closer than ``FOUND_RADIUS``, and the distance to the closest
    such individual. Catalog optima are at least twice ``FOUND_RADIUS``
    apart, so an individual can be within reach of one optimum at most.
    """
    pts = _positions(population)
    if pts.shape[0] == 0:
        return np.empty(0, dtype=int), np.empty(0)
    dist, idx = catalog.tree.query(pts, k=1, distance_upper_bound=FOUND_RADIUS)
    hit = dist < FOUND_RADIUS
    dist, idx = dist[hit], idx[hit]
    order = np.lexsort((dist, idx))
    idx, dist = idx[order], dist[order]
    first = np.ones(idx.size, dtype=bool)
    first[1:] = idx[1:] != idx[:-1]
    return idx[first], dist[first]


def count_found(population, catalog: OptimaCatalog) -> int:
    """Number of catalog optima with an individual closer than 0.005."""
    found, _ = match_optima(population, catalog)
    return int(found.size)


def mean_distance(population, catalog: OptimaCatalog) -> Optional[float]:
    """Mean distance from each found optimum to its closest individual.

    ``None`` when nothing was found.
    """
    _, dist = match_optima(population, catalog)
    if dist.size == 0:
        return None
    return float(dist.mean())


def _stat(values: Sequence[Optional[float]]) -> Stat:
    present = [v for v in values if v is not None]
    if not present:
        return Stat(None, None)
    mean = float(np.mean(present))
    std = float(np.std(present, ddof=1)) if len(present) > 1 else None
    return Stat(mean, std)


def aggregate(runs: Sequence[RunMetrics], catalog_size: Optional[int] = None) -> AggregateStats:
    """Per-measure mean and sample standard deviation over repeated runs.

    ``success_rate`` is the fraction of runs that found every cataloged
    optimum; it is NaN when ``catalog_size`` is not given.
    """
    if len(runs) < 2:
        raise ConfigurationError("aggregate needs at least 2 runs")
    if catalog_size is None:
        success = math.nan
    else:
        success = sum(r.optima_found == catalog_size for r in runs) / len(runs)
    return AggregateStats(
        runs=len(runs),
        optima_found=_stat([r.optima_found for r in runs]),
        mean_distance=_stat([r.mean_distance for r in runs]),
        evaluations=_stat([r.evaluations for r in runs]),
        elapsed_seconds=_stat([r.elapsed_seconds for r in runs]),
        iterations=_stat([r.iterations for r in runs]),
        success_rate=success,
    )
