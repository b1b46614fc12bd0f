"""Collective Animal Behavior (CAB) multimodal optimizer.

The optimizer maximizes. A run keeps two fixed-size memories: the best
individuals of the current generation and a historic memory maintained by a
dominance (minimum spacing) rule. Each generation is rebuilt from perturbed
copies of the historic memory plus attraction/repulsion or random moves for
the remaining individuals.

Random draws come from a single ``numpy.random.Generator`` per run, always in
this order within one iteration:

1. keep-best perturbations, shape ``(B, D)``, uniform on ``[-1, 1]``;
2. offspring branch selector ``r1``, shape ``(Np - B,)``;
3. memory selector ``r2``, shape ``(Np - B,)``;
4. step factor ``r``, shape ``(Np - B,)``, uniform on ``[-1, 1]``;
5. random re-initialization vectors, shape ``(Np - B, D)``.

All five blocks are drawn every iteration whatever branch each offspring
takes, so the stream layout depends only on ``(Np, B, D)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "CabParams",
    "CabResult",
    "ConfigurationError",
    "FixedIterations",
    "Individual",
    "MemoryArchive",
    "Plateau",
    "RunState",
    "SearchBounds",
    "attract",
    "dominance_filter",
    "dominance_radius",
    "extract_optima",
    "generate_offspring",
    "init_population",
    "keep_best",
    "nearest_memory_element",
    "run",
    "step",
    "update_memories",
]

Objective = Callable[[np.ndarray], np.ndarray]


class ConfigurationError(ValueError):
    """Invalid bounds, parameters or objective/bounds mismatch."""


@dataclass(frozen=True)
class SearchBounds:
    """Box constraints ``lower[j] < upper[j]`` for each of the D dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or upper.ndim != 1:
            raise ConfigurationError("bounds must be one-dimensional vectors")
        if lower.shape != upper.shape:
            raise ConfigurationError(
                f"lower and upper bounds differ in length ({lower.size} != {upper.size})"
            )
        if lower.size < 1:
            raise ConfigurationError("bounds must have at least one dimension")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ConfigurationError("bounds must be finite")
        if np.any(lower >= upper):
            raise ConfigurationError("lower bound must be strictly below upper bound in every dimension")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, low: float, high: float, dimension: int) -> "SearchBounds":
        return cls(np.full(dimension, float(low)), np.full(dimension, float(high)))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class CabParams:
    """Tuning knobs of the optimizer.

    Parameters
    ----------
    population_size : int
        Number of animals per generation (Np).
    memory_size : int
        Size of both memories (B), at most ``population_size``.
    history_prob : float
        Probability of moving relative to the historic memory rather than the
        generation memory (H).
    random_prob : float
        Probability of a random re-initialization move (P).
    iterations : int
        Number of generations for the fixed-iteration stopping rule (NI).
    rho_override : float, optional
        Dominance radius. Computed from the bounds when omitted.
    perturb_fraction : float
        Half-width of the keep-best perturbation, as a fraction of each
        dimension's range.
    seed : int
        Seed of the run's random generator, ``0 <= seed < 2**64``.
    """

    population_size: int = 200
    memory_size: int = 100
    history_prob: float = 0.6
    random_prob: float = 0.8
    iterations: int = 100
    rho_override: Optional[float] = None
    perturb_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if int(self.population_size) != self.population_size or self.population_size < 1:
            raise ConfigurationError("population_size (Np) must be a positive integer")
        if int(self.memory_size) != self.memory_size or self.memory_size < 1:
            raise ConfigurationError("memory_size (B) must be a positive integer")
        if self.memory_size > self.population_size:
            raise ConfigurationError("memory_size (B) must not exceed population_size (Np)")
        if not 0.0 <= self.history_prob <= 1.0:
            raise ConfigurationError("history_prob (H) must lie in [0, 1]")
        if not 0.0 <= self.random_prob <= 1.0:
            raise ConfigurationError("random_prob (P) must lie in [0, 1]")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ConfigurationError("iterations (NI) must be a non-negative integer")
        if self.rho_override is not None and not self.rho_override > 0:
            raise ConfigurationError("rho must be positive")
        # zero is allowed so the keep-best operator can be tested as an identity
        if not self.perturb_fraction >= 0:
            raise ConfigurationError("perturb_fraction must be non-negative")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an integer in [0, 2**64)")

    def rho(self, bounds: SearchBounds) -> float:
        if self.rho_override is not None:
            return float(self.rho_override)
        return dominance_radius(bounds)


@dataclass(frozen=True)
class Individual:
    position: np.ndarray
    fitness: float

    def __repr__(self):
        coords = ", ".join(f"{c:.6g}" for c in self.position)
        return f"Individual(({coords}), fitness={self.fitness:.6g})"


def _individuals(positions: np.ndarray, fitness: np.ndarray) -> list[Individual]:
    return [Individual(p.copy(), float(f)) for p, f in zip(positions, fitness)]


@dataclass
class MemoryArchive:
    """Generation memory (M_g) and historic memory (M_h), stored as arrays.

    Both memories are kept sorted by non-increasing fitness. ``survived``
    marks the historic elements that passed the dominance filter; the rest
    are padding taken from the removed elements.
    """

    g_positions: np.ndarray
    g_fitness: np.ndarray
    h_positions: np.ndarray
    h_fitness: np.ndarray
    survived: np.ndarray

    @property
    def generation_best(self) -> list[Individual]:
        return _individuals(self.g_positions, self.g_fitness)

    @property
    def historic_best(self) -> list[Individual]:
        return _individuals(self.h_positions, self.h_fitness)

    def copy(self) -> "MemoryArchive":
        return MemoryArchive(
            self.g_positions.copy(),
            self.g_fitness.copy(),
            self.h_positions.copy(),
            self.h_fitness.copy(),
            self.survived.copy(),
        )


@dataclass
class RunState:
    bounds: SearchBounds
    params: CabParams
    rng: np.random.Generator
    positions: np.ndarray  # sorted population X
    fitness: np.ndarray
    archive: MemoryArchive
    iteration: int = 0
    eval_count: int = 0

    @property
    def population(self) -> list[Individual]:
        return _individuals(self.positions, self.fitness)

    def evaluate(self, objective: Objective, positions: np.ndarray) -> np.ndarray:
        values = np.asarray(objective(positions), dtype=float).reshape(-1)
        if values.size != positions.shape[0]:
            raise ConfigurationError(
                f"objective returned {values.size} values for {positions.shape[0]} points"
            )
        self.eval_count += positions.shape[0]
        return values


@dataclass
class CabResult:
    final_historic: list[Individual]
    optima: list[Individual]
    eval_count: int
    elapsed_seconds: float
    iterations: int
    final_population: list[Individual] = field(default_factory=list)

    @property
    def historic_positions(self) -> np.ndarray:
        return np.array([ind.position for ind in self.final_historic])

    @property
    def population_positions(self) -> np.ndarray:
        return np.array([ind.position for ind in self.final_population])


def sort_by_fitness(positions: np.ndarray, fitness: np.ndarray):
    """Stable sort, best first. Equal fitness keeps the incoming order."""
    order = np.argsort(-fitness, kind="stable")
    return positions[order], fitness[order]


def dominance_radius(bounds: SearchBounds) -> float:
    """Default dominance radius: product of the ranges over ``10 * D``."""
    return float(np.prod(bounds.width) / (10 * bounds.dimension))


def _check_objective(objective, bounds: SearchBounds) -> None:
    dim = getattr(objective, "dimension", None)
    if dim is not None and dim != bounds.dimension:
        raise ConfigurationError(
            f"objective dimension {dim} does not match bounds dimension {bounds.dimension}"
        )


def init_population(bounds: SearchBounds, params: CabParams, objective: Objective) -> RunState:
    """Uniform random population, sorted, with both memories set to its top B."""
    _check_objective(objective, bounds)
    rng = np.random.default_rng(params.seed)
    positions = bounds.lower + rng.random((params.population_size, bounds.dimension)) * bounds.width
    state = RunState(
        bounds=bounds,
        params=params,
        rng=rng,
        positions=positions,
        fitness=np.empty(0),
        archive=None,  # filled below
    )
    fitness = state.evaluate(objective, positions)
    state.positions, state.fitness = sort_by_fitness(positions, fitness)
    b = params.memory_size
    top_pos, top_fit = state.positions[:b], state.fitness[:b]
    state.archive = MemoryArchive(
        g_positions=top_pos.copy(),
        g_fitness=top_fit.copy(),
        h_positions=top_pos.copy(),
        h_fitness=top_fit.copy(),
        survived=np.ones(b, dtype=bool),
    )
    return state


def keep_best(state: RunState, params: CabParams, objective: Objective):
    """Perturb every historic memory element inside a small box and evaluate.

    Returns ``(positions, fitness)`` with B rows.
    """
    bounds = state.bounds
    h = state.archive.h_positions
    half_width = params.perturb_fraction * bounds.width
    v = state.rng.uniform(-1.0, 1.0, size=h.shape) * half_width
    positions = bounds.clip(h + v)
    return positions, state.evaluate(objective, positions)


def nearest_memory_element(x, memory) -> Individual:
    """Memory element closest to ``x`` in Euclidean distance.

    Ties go to the lower index, which is the fitter element because memories
    are sorted best first.
    """
    if len(memory) == 0:
        raise RuntimeError("nearest_memory_element called with an empty memory")
    point = x.position if isinstance(x, Individual) else np.asarray(x, dtype=float)
    positions = np.array([m.position for m in memory], dtype=float)
    d = np.linalg.norm(positions - point, axis=1)
    return memory[int(np.argmin(d))]


def _nearest_rows(points: np.ndarray, memory: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, i.e. the fitter memory element on ties
    return memory[np.argmin(cdist(points, memory), axis=1)]


def attract(x: np.ndarray, target: np.ndarray, r) -> np.ndarray:
    """Move ``x`` by ``r`` times the offset to ``target``.

    Positive ``r`` attracts, negative ``r`` repels; ``r`` broadcasts per row.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    return x + r * (target - x)


def generate_offspring(state: RunState, params: CabParams, objective: Objective):
    """New positions for population slots B+1..Np.

    With probability ``1 - P`` an individual of the sorted population is
    attracted to or repelled from its nearest historic (probability H) or
    generation memory element; otherwise it is replaced by a uniform random
    point. Returns ``(positions, fitness)`` with ``Np - B`` rows.
    """
    bounds = state.bounds
    rng = state.rng
    b = params.memory_size
    x = state.positions[b:]
    n, dim = x.shape
    r1 = rng.random(n)
    r2 = rng.random(n)
    r = rng.uniform(-1.0, 1.0, size=n)
    fresh = bounds.lower + rng.random((n, dim)) * bounds.width
    if n == 0:
        return x.copy(), np.empty(0)

    archive = state.archive
    target = np.where(
        (r2 < params.history_prob)[:, None],
        _nearest_rows(x, archive.h_positions),
        _nearest_rows(x, archive.g_positions),
    )
    moved = attract(x, target, r)
    positions = np.where((r1 < 1.0 - params.random_prob)[:, None], moved, fresh)
    positions = bounds.clip(positions)
    return positions, state.evaluate(objective, positions)


def dominance_filter(positions: np.ndarray, rho: float) -> np.ndarray:
    """Greedy dominance pass over elements already sorted best first.

    An element is kept iff it lies at least ``rho`` from every element kept
    before it. Returns a boolean keep mask.
    """
    n = positions.shape[0]
    keep = np.zeros(n, dtype=bool)
    if n == 0:
        return keep
    dist = cdist(positions, positions)
    suppressed = np.zeros(n, dtype=bool)
    for i in range(n):
        if suppressed[i]:
            continue
        keep[i] = True
        suppressed |= dist[i] < rho
    return keep


def update_memories(
    archive: MemoryArchive, positions: np.ndarray, fitness: np.ndarray, rho: float
) -> MemoryArchive:
    """Refresh M_g from the new population and rebuild M_h by dominance.

    ``M_g`` becomes the top B of the new population. ``M_h`` keeps the
    elements of ``M_h + M_g`` that survive the dominance filter. When fewer
    than B survive, the rest of the new generation is offered to the filter
    too, and any remaining slots are padded with removed elements.
    """
    b = archive.h_positions.shape[0]
    x_pos, x_fit = sort_by_fitness(positions, fitness)
    g_pos, g_fit = x_pos[:b].copy(), x_fit[:b].copy()

    # old historic elements first so they win fitness ties against M_g copies
    u_pos, u_fit = sort_by_fitness(
        np.concatenate([archive.h_positions, g_pos]),
        np.concatenate([archive.h_fitness, g_fit]),
    )
    keep = dominance_filter(u_pos, rho)
    if keep.sum() < b and x_pos.shape[0] > b:
        # top up from the rest of the generation before padding
        u_pos = np.concatenate([u_pos, x_pos[b:]])
        u_fit = np.concatenate([u_fit, x_fit[b:]])
        keep = _top_up(u_pos, keep, rho, b)
    kept = np.flatnonzero(keep)[:b]
    pad = _padding(u_pos, kept, np.flatnonzero(~keep), rho, b - kept.size)
    chosen = np.concatenate([kept, pad])
    survived = np.concatenate([np.ones(kept.size, bool), np.zeros(pad.size, bool)])
    order = np.argsort(-u_fit[chosen], kind="stable")
    chosen, survived = chosen[order], survived[order]
    return MemoryArchive(
        g_positions=g_pos,
        g_fitness=g_fit,
        h_positions=u_pos[chosen].copy(),
        h_fitness=u_fit[chosen].copy(),
        survived=survived,
    )


def _top_up(positions: np.ndarray, keep: np.ndarray, rho: float, limit: int) -> np.ndarray:
    """Extend ``keep`` over the extra rows of ``positions`` that clear every kept row by ``rho``."""
    n_old = keep.size
    extra = positions[n_old:]
    clear = np.flatnonzero(cdist(extra, positions[:n_old][keep]).min(axis=1) >= rho)
    admitted = clear[dominance_filter(extra[clear], rho)][: limit - int(keep.sum())]
    extra_keep = np.zeros(extra.shape[0], dtype=bool)
    extra_keep[admitted] = True
    return np.concatenate([keep, extra_keep])


def _padding(
    positions: np.ndarray, kept: np.ndarray, removed: np.ndarray, rho: float, need: int
) -> np.ndarray:
    """Pick ``need`` removed rows, spread round-robin over the survivors.

    Every removed row belongs to the fittest survivor within ``rho`` of it.
    The fittest removed row of each survivor is taken first (survivors in
    fitness order), then the second fittest of each, and so on. Rows are
    assumed sorted best first.
    """
    if need <= 0 or removed.size == 0:
        return removed[:0]
    # argmax picks the first, i.e. fittest, survivor within reach
    owner = np.argmax(cdist(positions[kept], positions[removed]) < rho, axis=0)
    by_owner = np.argsort(owner, kind="stable")
    sorted_owner = owner[by_owner]
    rank = np.empty_like(by_owner)
    rank[by_owner] = np.arange(by_owner.size) - np.searchsorted(sorted_owner, sorted_owner)
    return removed[np.lexsort((owner, rank))][:need]


def step(state: RunState, objective: Objective, rho: float) -> RunState:
    """One full generation. Mutates and returns ``state``."""
    params = state.params
    kb_pos, kb_fit = keep_best(state, params, objective)
    off_pos, off_fit = generate_offspring(state, params, objective)
    new_pos = np.concatenate([kb_pos, off_pos])
    new_fit = np.concatenate([kb_fit, off_fit])
    state.archive = update_memories(state.archive, new_pos, new_fit, rho)
    state.positions, state.fitness = sort_by_fitness(new_pos, new_fit)
    state.iteration += 1
    return state


def extract_optima(historic: Sequence[Individual]) -> list[Individual]:
    """Memory elements above the significance threshold ``max_fitness / 6``.

    When the best fitness is not positive the threshold is taken on fitness
    shifted so the worst element sits at zero: ``min + (max - min) / 6``.
    A flat non-positive memory is returned whole.
    """
    if len(historic) == 0:
        raise ValueError("extract_optima needs a non-empty memory")
    fitness = np.array([ind.fitness for ind in historic])
    best, worst = fitness.max(), fitness.min()
    if best > 0:
        threshold = best / 6.0
    elif best == worst:
        return list(historic)
    else:
        threshold = worst + (best - worst) / 6.0
    return [ind for ind, f in zip(historic, fitness) if f > threshold]


class StoppingPolicy(Protocol):
    def reset(self) -> None: ...

    def should_stop(self, state: RunState) -> bool: ...


@dataclass
class FixedIterations:
    iterations: int

    def reset(self) -> None:
        pass

    def should_stop(self, state: RunState) -> bool:
        return state.iteration >= self.iterations


@dataclass
class Plateau:
    """Stop once ``score(state)`` has not risen for ``window`` generations.

    Only generations after ``warmup`` count towards the window. ``hard_cap``
    bounds the run regardless of the score.
    """

    window: int
    warmup: int
    hard_cap: int
    score: Callable[[RunState], int]
    _best: float = field(default=-np.inf, init=False, repr=False)
    _stall: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("plateau window must be >= 1")
        if self.warmup < 0:
            raise ConfigurationError("plateau warmup must be >= 0")
        if self.hard_cap <= self.warmup:
            raise ConfigurationError("plateau hard cap must exceed the warmup")

    def reset(self) -> None:
        self._best = -np.inf
        self._stall = 0

    def should_stop(self, state: RunState) -> bool:
        current = self.score(state)
        if current > self._best:
            self._best = current
            self._stall = 0
        elif state.iteration > self.warmup:
            self._stall += 1
        if state.iteration >= self.hard_cap:
            return True
        return state.iteration >= self.warmup and self._stall >= self.window


def run(
    objective: Objective,
    bounds: SearchBounds,
    params: CabParams,
    stop: Optional[StoppingPolicy] = None,
    on_iteration: Optional[Callable[[RunState], None]] = None,
) -> CabResult:
    """Run the optimizer until ``stop`` fires (default: ``params.iterations``).

    ``objective`` maps an ``(n, D)`` array to ``n`` fitness values to be
    maximized. ``on_iteration`` sees the state after initialization and
    after every generation; it must not modify it.
    """
    if stop is None:
        stop = FixedIterations(params.iterations)
    rho = params.rho(bounds)
    start = time.perf_counter()
    stop.reset()
    state = init_population(bounds, params, objective)
    if on_iteration is not None:
        on_iteration(state)
    while not stop.should_stop(state):
        step(state, objective, rho)
        if on_iteration is not None:
            on_iteration(state)
    elapsed = time.perf_counter() - start
    historic = state.archive.historic_best
    return CabResult(
        final_historic=historic,
        optima=extract_optima(historic),
        eval_count=state.eval_count,
        elapsed_seconds=elapsed,
        iterations=state.iteration,
        final_population=state.population,
    )
