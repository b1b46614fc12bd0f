"""Benchmark objectives f1..f8 and the four-bump example function.

Every function takes an array whose last axis holds the D coordinates and
returns one value per point, so the same code serves single evaluations and
whole populations.

Formulas follow the printed definitions, with three readings fixed here:

* ``f2`` carries the sixth power of the sine, like ``f1``; with a bare sine
  only three of its five peaks are maxima.
* ``f3`` is ``1 / (1 + |z**6 + 1|)``, the modulus making it real valued.
* the example's third bump is ``2 * exp(-(x1**2 + x2**2))``.

``f7`` is a minimization surface. ``ObjectiveSpec.sign`` is -1 for it and
``CountingObjective`` applies the sign, so every consumer that wants a
fitness to maximize goes through one place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigurationError, SearchBounds

__all__ = [
    "FUNCTION_IDS",
    "CountingObjective",
    "ObjectiveSpec",
    "evaluate",
    "example_function",
    "spec_of",
]


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def f1(x):
    x = np.asarray(x, dtype=float)[..., 0]
    return np.sin(5 * np.pi * x) ** 6


def f2(x):
    x = np.asarray(x, dtype=float)[..., 0]
    return 2.0 ** (-2.0 * ((x - 0.1) / 0.9) ** 2) * np.sin(5 * np.pi * x) ** 6


def f3(x):
    x1, x2 = _split(x)
    z = x1 + 1j * x2
    return 1.0 / (1.0 + np.abs(z**6 + 1))


def f4(x):
    x1, x2 = _split(x)
    return x1 * np.sin(4 * np.pi * x1) - x2 * np.sin(4 * np.pi * x2 + np.pi) + 1


def f5(x):
    x1, x2 = _split(x)
    return -(20 + x1**2 + x2**2 - 10 * (np.cos(2 * np.pi * x1) + np.cos(2 * np.pi * x2)))


def _shubert_factor(t):
    return sum(np.cos((j + 1) * t + j) for j in range(1, 6))


def f6(x):
    x1, x2 = _split(x)
    return -_shubert_factor(x1) * _shubert_factor(x2)


def f7(x):
    x1, x2 = _split(x)
    root2 = np.sqrt(2.0)
    return (x1**2 + x2**2) / 4000 - np.cos(x1 / root2) * np.cos(x2 / root2) + 1


def f8(x):
    x1, x2 = _split(x)
    return (np.cos(0.5 * x1) + np.cos(0.5 * x2)) / 4000 + np.cos(10 * x1) * np.cos(10 * x2)


def example_function(x1, x2):
    """Four Gaussian bumps: height 2 at (0, 0) and (0, -4), height 1 at (+-4, 4)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (
        np.exp(-((x1 - 4) ** 2) - (x2 - 4) ** 2)
        + np.exp(-((x1 + 4) ** 2) - (x2 - 4) ** 2)
        + 2 * np.exp(-(x1**2 + x2**2))
        + 2 * np.exp(-(x1**2) - (x2 + 4) ** 2)
    )


def _example(x):
    x1, x2 = _split(x)
    return example_function(x1, x2)


@dataclass(frozen=True)
class ObjectiveSpec:
    id: str
    name: str
    dimension: int
    bounds: SearchBounds
    declared_optima_count: int
    function: Callable[[np.ndarray], np.ndarray]
    sign: float = 1.0  # multiply by this to get a fitness to maximize


def _spec(id, name, dim, low, high, count, fn, sign=1.0):
    return ObjectiveSpec(id, name, dim, SearchBounds.uniform(low, high, dim), count, fn, sign)


_REGISTRY = {
    s.id: s
    for s in (
        _spec("f1", "Deb's function", 1, 0, 1, 5, f1),
        _spec("f2", "Deb's decreasing function", 1, 0, 1, 5, f2),
        _spec("f3", "Roots function", 2, -2, 2, 6, f3),
        _spec("f4", "Two dimensional multimodal function", 2, -2, 2, 100, f4),
        _spec("f5", "Rastrigin's function", 2, -10, 10, 100, f5),
        _spec("f6", "Shubert function", 2, -10, 10, 18, f6),
        _spec("f7", "Griewank function", 2, -100, 100, 100, f7, sign=-1.0),
        _spec("f8", "Modified Griewank function", 2, 0, 120, 100, f8),
        _spec("example", "Four-bump example function", 2, -5, 5, 4, _example),
    )
}

FUNCTION_IDS = tuple(_REGISTRY)


def spec_of(id: str) -> ObjectiveSpec:
    try:
        return _REGISTRY[id]
    except KeyError:
        raise ConfigurationError(
            f"unknown function {id!r} (expected one of {', '.join(FUNCTION_IDS)})"
        ) from None


def _validated(spec: ObjectiveSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != spec.dimension:
        raise ConfigurationError(
            f"{spec.id} expects {spec.dimension}-dimensional points, got shape {x.shape}"
        )
    if np.any(x < spec.bounds.lower) or np.any(x > spec.bounds.upper):
        raise ConfigurationError(f"point outside the search space of {spec.id}")
    return x


def evaluate(id: str, x):
    """Value of the printed formula at ``x`` (a point or an array of points)."""
    spec = spec_of(id)
    value = spec.function(_validated(spec, x))
    return float(value) if np.ndim(value) == 0 else value


class CountingObjective:
    """Fitness-to-maximize view of a benchmark that counts evaluations.

    Calling it on an ``(n, D)`` array returns ``n`` values and adds ``n`` to
    ``eval_count``; a single ``(D,)`` point counts once.
    """

    def __init__(self, id: str):
        self.spec = spec_of(id)
        self.eval_count = 0

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def bounds(self) -> SearchBounds:
        return self.spec.bounds

    def __call__(self, x):
        x = _validated(self.spec, x)
        self.eval_count += int(np.prod(x.shape[:-1], dtype=int))
        value = self.spec.sign * self.spec.function(x)
        return float(value) if np.ndim(value) == 0 else value

    def __repr__(self):
        return f"CountingObjective({self.spec.id!r}, eval_count={self.eval_count})"
