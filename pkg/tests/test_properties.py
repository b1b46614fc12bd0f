"""Invariants of the optimizer that must hold for any seed and parameters."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from cabopt.core import (
    CabParams,
    Individual,
    SearchBounds,
    attract,
    dominance_filter,
    extract_optima,
    init_population,
    run,
    step,
)
from cabopt.objectives import FUNCTION_IDS, CountingObjective

params_strategy = st.builds(
    lambda np_, b_frac, h, p, pf, seed: CabParams(
        population_size=np_,
        memory_size=max(1, int(np_ * b_frac)),
        history_prob=h,
        random_prob=p,
        perturb_fraction=pf,
        seed=seed,
    ),
    st.integers(2, 40),
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 0.5),
    st.integers(0, 2**64 - 1),
)


def _sorted(values):
    return bool(np.all(np.diff(values) <= 0))


@settings(max_examples=40, deadline=None)
@given(params=params_strategy, id=st.sampled_from(FUNCTION_IDS), k=st.integers(0, 15))
def test_fe_accounting(params, id, k):
    objective = CountingObjective(id)
    result = run(objective, objective.bounds, CabParams(**{**params.__dict__, "iterations": k}))
    assert result.eval_count == params.population_size * (k + 1)
    assert objective.eval_count == result.eval_count


@settings(max_examples=40, deadline=None)
@given(params=params_strategy, id=st.sampled_from(FUNCTION_IDS))
def test_sortedness_and_memory_sizes(params, id):
    objective = CountingObjective(id)
    state = init_population(objective.bounds, params, objective)
    rho = params.rho(objective.bounds)
    for _ in range(5):
        step(state, objective, rho)
        assert _sorted(state.fitness)
        assert _sorted(state.archive.g_fitness)
        assert _sorted(state.archive.h_fitness)
        assert len(state.archive.g_fitness) == len(state.archive.h_fitness) == params.memory_size


def test_bound_closure_over_a_million_operator_applications():
    # 4 domains x 250 generations x 1000 individuals
    for id, np_, gens in (("f8", 1000, 250), ("f1", 1000, 250), ("f7", 1000, 250), ("example", 1000, 250)):
        objective = CountingObjective(id)
        bounds = objective.bounds
        params = CabParams(population_size=np_, memory_size=100, history_prob=0.5, random_prob=0.3,
                           perturb_fraction=0.2, seed=17)
        state = init_population(bounds, params, objective)
        rho = params.rho(bounds)
        for _ in range(gens):
            step(state, objective, rho)
            for arr in (state.positions, state.archive.h_positions, state.archive.g_positions):
                assert np.all(arr >= bounds.lower) and np.all(arr <= bounds.upper)
        assert objective.eval_count == np_ * (gens + 1)


@pytest.mark.parametrize("id", ["example", "f4", "f6"])
def test_archive_best_never_decreases(id):
    objective = CountingObjective(id)
    params = CabParams(population_size=20, memory_size=5, seed=3)
    state = init_population(objective.bounds, params, objective)
    rho = params.rho(objective.bounds)
    best = state.archive.h_fitness[0]
    for _ in range(1000):
        step(state, objective, rho)
        assert state.archive.h_fitness[0] >= best
        best = state.archive.h_fitness[0]


@settings(max_examples=30, deadline=None)
@given(params=params_strategy, id=st.sampled_from(["f3", "example", "f6"]), rho=st.floats(0.01, 5.0))
def test_survivors_are_rho_apart(params, id, rho):
    objective = CountingObjective(id)
    state = init_population(objective.bounds, params, objective)
    for _ in range(5):
        step(state, objective, rho)
        survivors = state.archive.h_positions[state.archive.survived]
        if len(survivors) > 1:
            assert pdist(survivors).min() >= rho


@settings(max_examples=50, deadline=None)
@given(
    points=st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=30),
    rho=st.floats(0.01, 5.0),
)
def test_dominance_filter_is_greedy_and_spaced(points, rho):
    positions = np.array(points)
    keep = dominance_filter(positions, rho)
    assert keep[0]
    kept = positions[keep]
    if len(kept) > 1:
        assert pdist(kept).min() >= rho
    # every removed point is within rho of an earlier kept point
    for i in np.flatnonzero(~keep):
        earlier = positions[:i][keep[:i]]
        assert np.min(np.linalg.norm(earlier - positions[i], axis=1)) < rho


@settings(max_examples=20, deadline=None)
@given(params=params_strategy, id=st.sampled_from(FUNCTION_IDS))
def test_same_seed_runs_are_bit_identical(params, id):
    trail_a, trail_b = [], []
    for trail in (trail_a, trail_b):
        objective = CountingObjective(id)
        run(
            objective,
            objective.bounds,
            CabParams(**{**params.__dict__, "iterations": 8}),
            on_iteration=lambda s, t=trail: t.append(s.positions.copy()),
        )
    assert len(trail_a) == len(trail_b) == 9
    for a, b in zip(trail_a, trail_b):
        assert a.tobytes() == b.tobytes()


def test_different_seeds_differ():
    objective = CountingObjective("f3")
    a = run(objective, objective.bounds, CabParams(population_size=20, memory_size=5, iterations=3, seed=1))
    b = run(objective, objective.bounds, CabParams(population_size=20, memory_size=5, iterations=3, seed=2))
    assert not np.array_equal(a.historic_positions, b.historic_positions)


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_extract_optima_threshold(fitness):
    fitness = sorted(fitness, reverse=True)
    historic = [Individual(np.array([float(i)]), f) for i, f in enumerate(fitness)]
    kept = extract_optima(historic)
    best, worst = max(fitness), min(fitness)
    if best > 0:
        threshold = best / 6
        assert [k.fitness for k in kept] == [f for f in fitness if f > threshold]
        assert kept[0].fitness == best
    elif best == worst:
        assert len(kept) == len(fitness)
    else:
        threshold = worst + (best - worst) / 6
        assert [k.fitness for k in kept] == [f for f in fitness if f > threshold]
    assert all(k in historic for k in kept)


@settings(max_examples=60)
@given(
    x=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    t=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    r=st.floats(-1, 1),
)
def test_attraction_stays_on_segment_line(x, t, r):
    x, t = np.array([x]), np.array([t])
    a = attract(x, t, np.array([r]))[0]
    d, o = t[0] - x[0], a - x[0]
    assert np.linalg.norm(o) <= np.linalg.norm(d) * (1 + 1e-12) + 1e-12
    assert abs(d[0] * o[1] - d[1] * o[0]) <= 1e-9 * (1 + np.linalg.norm(d) ** 2)


def test_bounds_reject_any_non_increasing_pair():
    with pytest.raises(ValueError):
        SearchBounds([0.0, 1.0], [1.0, 1.0])
