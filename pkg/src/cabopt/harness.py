"""Seeded multi-run experiments and their result tables.

Run ``i`` of an experiment uses seed ``base_seed + i``, so a batch is fully
reproducible from its configuration and runs can execute in any order or in
parallel without changing any non-timing field.

Result files hold one row per run followed by an ``aggregate`` row (means)
and, for two or more runs, an ``aggregate_std`` row (sample standard
deviations). Columns::

    objective, run_index, seed, NO, DO, FE, ET_seconds, iterations, optima_positions

``NO`` and ``DO`` score the final historic memory. ``optima_positions`` lists,
for every cataloged optimum that was found, the closest memory element, as
semicolon-separated coordinate tuples in CSV and as nested lists in JSON.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import CabParams, ConfigurationError, FixedIterations, Plateau, run
from .metrics import AggregateStats, RunMetrics, Stat, aggregate, match_optima
from .objectives import CountingObjective, spec_of
from .oracle import OptimaCatalog, ensure_catalog

__all__ = [
    "COLUMNS",
    "PRESETS",
    "ExperimentConfig",
    "ExperimentResult",
    "FixedStop",
    "PlateauStop",
    "RunRecord",
    "emit_results",
    "parse_plateau",
    "read_config_file",
    "run_experiment",
    "run_single",
]

log = logging.getLogger(__name__)

COLUMNS = (
    "objective",
    "run_index",
    "seed",
    "NO",
    "DO",
    "FE",
    "ET_seconds",
    "iterations",
    "optima_positions",
)


@dataclass(frozen=True)
class FixedStop:
    iterations: int

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ConfigurationError("iterations (NI) must be a non-negative integer")


@dataclass(frozen=True)
class PlateauStop:
    """Stop when the found-optima count stalls for ``window`` generations after ``warmup``."""

    window: int
    warmup: int
    hard_cap: int

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("plateau window must be >= 1")
        if self.warmup < 0:
            raise ConfigurationError("plateau warmup must be >= 0")
        if self.hard_cap <= self.warmup:
            raise ConfigurationError("plateau hard cap must exceed the warmup")


Stopping = Union[FixedStop, PlateauStop]

# Population sizes follow the two experiment groups: Np=200 for the smooth
# functions f1-f4, Np=1000 for f5-f8. The small keep-best step is what lets
# memory elements settle within the 0.005 found radius.
PRESETS: dict[str, tuple[CabParams, Stopping]] = {
    "paper-smooth": (
        CabParams(population_size=200, memory_size=100, history_prob=0.6, random_prob=0.8,
                  perturb_fraction=0.001),
        PlateauStop(window=10, warmup=100, hard_cap=10_000),
    ),
    "paper-rough": (
        CabParams(population_size=1000, memory_size=100, history_prob=0.6, random_prob=0.8,
                  perturb_fraction=0.001),
        PlateauStop(window=50, warmup=500, hard_cap=20_000),
    ),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a batch of runs.

    ``cab.seed`` is ignored; run ``i`` is seeded with ``base_seed + i``.
    """

    objective_id: str
    cab: CabParams = field(default_factory=CabParams)
    runs: int = 50
    stopping: Stopping = field(default_factory=lambda: FixedStop(100))
    base_seed: int = 0
    output_path: Optional[Path] = None
    output_format: str = "csv"
    catalog_dir: Optional[Path] = None
    workers: int = 1

    def __post_init__(self):
        spec_of(self.objective_id)
        if int(self.runs) != self.runs or self.runs < 1:
            raise ConfigurationError("runs must be a positive integer")
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError(f"output format must be csv or json, not {self.output_format!r}")
        if int(self.base_seed) != self.base_seed or self.base_seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if self.base_seed + self.runs > 2**64:
            raise ConfigurationError("seed + runs must stay below 2**64")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def seed_of(self, run_index: int) -> int:
        return self.base_seed + run_index


@dataclass
class RunRecord:
    objective: str
    run_index: int
    seed: int
    metrics: RunMetrics
    optima_positions: np.ndarray
    union_found: int = 0
    union_distance: Optional[float] = None

    @property
    def optima_found(self) -> int:
        return self.metrics.optima_found


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    catalog_size: int
    records: list[RunRecord]
    stats: AggregateStats


def _stopping_policy(stopping: Stopping, catalog: OptimaCatalog):
    if isinstance(stopping, FixedStop):
        return FixedIterations(stopping.iterations)

    def score(state):
        return int(match_optima(state.archive.h_positions, catalog)[0].size)

    return Plateau(stopping.window, stopping.warmup, stopping.hard_cap, score)


def run_single(config: ExperimentConfig, catalog: OptimaCatalog, run_index: int) -> RunRecord:
    """Execute run ``run_index`` of ``config`` and score it against ``catalog``."""
    seed = config.seed_of(run_index)
    objective = CountingObjective(config.objective_id)
    params = replace(config.cab, seed=seed)
    result = run(objective, objective.bounds, params, _stopping_policy(config.stopping, catalog))

    expected_fe = params.population_size * (result.iterations + 1)
    if result.eval_count != expected_fe or objective.eval_count != expected_fe:
        raise RuntimeError(
            f"evaluation count {result.eval_count} != Np*(iterations+1) = {expected_fe}"
        )

    historic = result.historic_positions
    found, dist = match_optima(historic, catalog)
    closest = _closest_members(historic, catalog.positions[found])
    union = np.concatenate([historic, result.population_positions])
    u_found, u_dist = match_optima(union, catalog)
    return RunRecord(
        objective=config.objective_id,
        run_index=run_index,
        seed=seed,
        metrics=RunMetrics(
            optima_found=int(found.size),
            mean_distance=float(dist.mean()) if dist.size else None,
            evaluations=result.eval_count,
            elapsed_seconds=result.elapsed_seconds,
            iterations=result.iterations,
        ),
        optima_positions=closest,
        union_found=int(u_found.size),
        union_distance=float(u_dist.mean()) if u_dist.size else None,
    )


def _closest_members(members: np.ndarray, optima: np.ndarray) -> np.ndarray:
    if optima.shape[0] == 0:
        return np.empty((0, members.shape[1]))
    d = np.linalg.norm(members[None, :, :] - optima[:, None, :], axis=2)
    return members[np.argmin(d, axis=1)]


def _single_run_stats(record: RunRecord, catalog_size: int) -> AggregateStats:
    m = record.metrics
    return AggregateStats(
        runs=1,
        optima_found=Stat(float(m.optima_found), None),
        mean_distance=Stat(m.mean_distance, None),
        evaluations=Stat(float(m.evaluations), None),
        elapsed_seconds=Stat(m.elapsed_seconds, None),
        iterations=Stat(float(m.iterations), None),
        success_rate=float(m.optima_found == catalog_size),
    )


def run_experiment(config: ExperimentConfig, catalog: Optional[OptimaCatalog] = None) -> ExperimentResult:
    """Run the batch, write the result file if configured, and aggregate.

    The oracle catalog is loaded from ``config.catalog_dir`` (built there on
    first use) unless one is passed in.
    """
    if catalog is None:
        catalog = ensure_catalog(config.objective_id, config.catalog_dir)
    elif catalog.objective_id != config.objective_id:
        raise ConfigurationError(
            f"catalog is for {catalog.objective_id!r}, experiment is on {config.objective_id!r}"
        )
    indices = range(config.runs)
    if config.workers > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(run_single, [config] * config.runs, [catalog] * config.runs, indices))
    else:
        records = [run_single(config, catalog, i) for i in indices]
    records.sort(key=lambda r: r.run_index)

    result = ExperimentResult(config, len(catalog), records, stats_of(records, len(catalog)))
    if config.output_path is not None:
        emit_results(result, config.output_format, config.output_path)
    return result


def _num(value) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return int(value) if value.is_integer() and abs(value) < 2**53 else value


def _rows(result: ExperimentResult) -> list[dict]:
    rows = []
    for r in result.records:
        m = r.metrics
        rows.append(
            {
                "objective": r.objective,
                "run_index": r.run_index,
                "seed": r.seed,
                "NO": m.optima_found,
                "DO": m.mean_distance,
                "FE": m.evaluations,
                "ET_seconds": m.elapsed_seconds,
                "iterations": m.iterations,
                "optima_positions": [[float(c) for c in p] for p in r.optima_positions],
            }
        )
    s = result.stats
    summary = [("aggregate", "mean")]
    if s.runs >= 2:
        summary.append(("aggregate_std", "std"))
    for label, attr in summary:
        rows.append(
            {
                "objective": result.config.objective_id,
                "run_index": label,
                "seed": None,
                "NO": _num(getattr(s.optima_found, attr)),
                "DO": getattr(s.mean_distance, attr),
                "FE": _num(getattr(s.evaluations, attr)),
                "ET_seconds": getattr(s.elapsed_seconds, attr),
                "iterations": _num(getattr(s.iterations, attr)),
                "optima_positions": None,
            }
        )
    return rows


def _csv_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join("(" + ",".join(repr(c) for c in p) + ")" for p in value)
    return str(value)


def emit_results(result: ExperimentResult, format: str, path) -> Path:
    """Write per-run and aggregate rows to ``path`` as CSV or JSON.

    Missing values (DO when nothing was found, summary-row seeds) are empty
    CSV fields and JSON ``null``.
    """
    path = Path(path)
    rows = _rows(result)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for row in rows:
                writer.writerow([_csv_field(row[c]) for c in COLUMNS])
    elif format == "json":
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigurationError(f"output format must be csv or json, not {format!r}")
    log.info("wrote %d rows to %s", len(rows), path)
    return path


def parse_plateau(text: str) -> PlateauStop:
    """Parse ``"WINDOW,WARMUP,CAP"``."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise ConfigurationError("plateau must be WINDOW,WARMUP,CAP")
    try:
        window, warmup, cap = (int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"plateau values must be integers, got {text!r}") from None
    return PlateauStop(window, warmup, cap)


def read_config_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` starts a comment.

    Keys are the long CLI flag names without dashes (``h-prob`` and
    ``h_prob`` are the same key).
    """
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        values[key.strip().lower().replace("_", "-")] = value.strip()
    return values


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def summarize(result: ExperimentResult) -> str:
    """One-line human-readable summary of an experiment."""
    s = result.stats

    def fmt(stat: Stat, spec: str) -> str:
        if stat.mean is None:
            return "-"
        if stat.std is None:
            return format(stat.mean, spec)
        return f"{stat.mean:{spec}}({stat.std:{spec}})"

    return (
        f"{result.config.objective_id}: runs={s.runs} catalog={result.catalog_size} "
        f"NO={fmt(s.optima_found, '.4g')} DO={fmt(s.mean_distance, '.3g')} "
        f"FE={fmt(s.evaluations, '.6g')} ET={fmt(s.elapsed_seconds, '.3g')}s"
    )


def stats_of(records: Sequence[RunRecord], catalog_size: int) -> AggregateStats:
    if len(records) >= 2:
        return aggregate([r.metrics for r in records], catalog_size=catalog_size)
    return _single_run_stats(records[0], catalog_size)
