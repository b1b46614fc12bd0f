"""Command-line entry point: ``cabopt run | oracle | demo``.

Exit status is 0 on success, 1 when a run or the oracle fails, and 2 for
usage errors (unknown flags, unknown functions, invalid parameters).

Run settings are resolved in order of precedence: command-line flags, then
the ``--config`` file, then the ``--preset``, then the library defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import CabParams, ConfigurationError, run
from .harness import (
    PRESETS,
    ExperimentConfig,
    FixedStop,
    parse_plateau,
    read_config_file,
    run_experiment,
    summarize,
)
from .objectives import FUNCTION_IDS, CountingObjective
from .oracle import OracleError, catalog_path, default_catalog_dir, ensure_catalog

log = logging.getLogger("cabopt")

# flag name -> (CabParams field, converter)
_CAB_FLAGS = {
    "np": ("population_size", int),
    "b": ("memory_size", int),
    "h-prob": ("history_prob", float),
    "p-prob": ("random_prob", float),
    "rho": ("rho_override", float),
    "perturb": ("perturb_fraction", float),
}
_RUN_KEYS = {
    "function", "preset", "iterations", "plateau", "runs", "seed", "out", "format",
    "catalog-dir", "workers", *_CAB_FLAGS,
}

# The worked numerical example on the four-bump function.
DEMO_PARAMS = CabParams(
    population_size=10, memory_size=4, history_prob=0.8, random_prob=0.1, iterations=30, rho_override=3.0
)
DEMO_MAXIMA = np.array([[0.0, 0.0], [0.0, -4.0], [-4.0, 4.0], [4.0, 4.0]])


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cabopt", description="Collective animal behavior multimodal optimizer.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a seeded batch and write a result table")
    p.add_argument("--function", help=f"objective id ({', '.join(FUNCTION_IDS)})")
    p.add_argument("--preset", choices=sorted(PRESETS), help="benchmark parameter profile")
    p.add_argument("--config", type=Path, help="flat key = value file mirroring these flags")
    p.add_argument("--np", type=int, help="population size Np")
    p.add_argument("--b", type=int, help="memory size B")
    p.add_argument("--h-prob", type=float, help="probability H of using the historic memory")
    p.add_argument("--p-prob", type=float, help="probability P of a random move")
    p.add_argument("--rho", type=float, help="dominance radius (default: from the bounds)")
    p.add_argument("--perturb", type=float, help="keep-best step as a fraction of the range")
    stop = p.add_mutually_exclusive_group()
    stop.add_argument("--iterations", type=int, help="fixed number of generations NI")
    stop.add_argument("--plateau", metavar="WINDOW,WARMUP,CAP", help="stop when found optima stall")
    p.add_argument("--runs", type=int, help="number of runs (default 50)")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i (default 0)")
    p.add_argument("--out", type=Path, help="result file (default: print the summary only)")
    p.add_argument("--format", choices=("csv", "json"), help="result format (default csv)")
    p.add_argument("--catalog-dir", type=Path, help="oracle catalog cache directory")
    p.add_argument("--workers", type=int, help="parallel worker processes (default 1)")

    o = sub.add_parser("oracle", help="build or refresh optima catalogs")
    o.add_argument("--function", action="append", choices=FUNCTION_IDS, help="repeatable; default all")
    o.add_argument("--refresh", action="store_true", help="rebuild even when cached")
    o.add_argument("--catalog-dir", type=Path)

    d = sub.add_parser("demo", help="run the four-bump numerical example and print M_h")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--iterations", type=int, default=DEMO_PARAMS.iterations)
    return parser


def _settings(args: argparse.Namespace) -> dict[str, str]:
    """Merge config-file values with explicit flags (flags win)."""
    values: dict[str, str] = {}
    if args.config is not None:
        values = read_config_file(args.config)
        unknown = sorted(set(values) - _RUN_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    for key in _RUN_KEYS:
        flag = getattr(args, key.replace("-", "_"))
        if flag is not None:
            values[key] = str(flag)
    # one stopping rule: a flag for either replaces whatever the file set
    if args.iterations is not None:
        values.pop("plateau", None)
    if args.plateau is not None:
        values.pop("iterations", None)
    return values


def _convert(key: str, value: str, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {value!r}") from None


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = _settings(args)
    if "function" not in values:
        raise ConfigurationError("--function is required")
    cab, stopping = CabParams(), FixedStop(CabParams().iterations)
    if "preset" in values:
        if values["preset"] not in PRESETS:
            raise ConfigurationError(f"unknown preset {values['preset']!r}")
        cab, stopping = PRESETS[values["preset"]]
    overrides = {
        field: _convert(key, values[key], kind) for key, (field, kind) in _CAB_FLAGS.items() if key in values
    }
    if "iterations" in values and "plateau" in values:
        raise ConfigurationError("iterations and plateau are mutually exclusive")
    if "iterations" in values:
        overrides["iterations"] = _convert("iterations", values["iterations"], int)
        stopping = FixedStop(overrides["iterations"])
    elif "plateau" in values:
        stopping = parse_plateau(values["plateau"])
    cab = replace(cab, **overrides)  # validates the combination (B <= Np etc.)
    return ExperimentConfig(
        objective_id=values["function"],
        cab=cab,
        runs=_convert("runs", values.get("runs", "50"), int),
        stopping=stopping,
        base_seed=_convert("seed", values.get("seed", "0"), int),
        output_path=Path(values["out"]) if "out" in values else None,
        output_format=values.get("format", "csv"),
        catalog_dir=Path(values["catalog-dir"]) if "catalog-dir" in values else None,
        workers=_convert("workers", values.get("workers", "1"), int),
    )


def _cmd_run(args) -> int:
    config = experiment_from_args(args)
    result = run_experiment(config)
    print(summarize(result))
    if config.output_path is not None:
        print(f"wrote {config.output_path}")
    return 0


def _cmd_oracle(args) -> int:
    directory = args.catalog_dir or default_catalog_dir()
    for id in args.function or FUNCTION_IDS:
        catalog = ensure_catalog(id, directory, refresh=args.refresh)
        print(f"{id}: {len(catalog)} optima -> {catalog_path(id, directory)}")
    return 0


def _cmd_demo(args) -> int:
    params = replace(DEMO_PARAMS, seed=args.seed, iterations=args.iterations)
    objective = CountingObjective("example")
    result = run(objective, objective.bounds, params)
    print(
        f"four-bump example: Np={params.population_size} B={params.memory_size} "
        f"H={params.history_prob} P={params.random_prob} rho={params.rho_override:g} "
        f"NI={result.iterations} seed={params.seed}"
    )
    print("final historic memory M_h:")
    for i, ind in enumerate(result.final_historic, 1):
        nearest = DEMO_MAXIMA[np.argmin(np.linalg.norm(DEMO_MAXIMA - ind.position, axis=1))]
        gap = float(np.linalg.norm(nearest - ind.position))
        print(
            f"  {i}  x=({ind.position[0]: .5f}, {ind.position[1]: .5f})  f={ind.fitness:.5f}"
            f"  nearest maximum ({nearest[0]:g}, {nearest[1]:g}) at {gap:.4f}"
        )
    return 0


_COMMANDS = {"run": _cmd_run, "oracle": _cmd_oracle, "demo": _cmd_demo}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"cabopt: error: {exc}", file=sys.stderr)
        return 2
    except (OracleError, OSError, RuntimeError) as exc:
        print(f"cabopt: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
