"""Brute-force optima catalogs for the benchmark functions.

A catalog is built by scanning a regular grid, polishing every grid-local
maximum with a coordinate pattern search, merging duplicates and dropping
insignificant maxima. Nothing here touches the optimizer, so catalogs can be
used to score it.

Catalog files are tab-separated text::

    # cabopt optima catalog
    # objective=f1
    # dimension=1
    # resolution=2000
    # refine_tolerance=1e-07
    # cutoff_rule=threshold
    # cutoff=0.16666666666666666
    objective	x1	value
    f1	0.1	1.0
    ...

Floats are written with ``repr`` so a load reproduces them exactly.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import SearchBounds
from .objectives import FUNCTION_IDS, spec_of

__all__ = [
    "DEDUP_RADIUS",
    "OptimaCatalog",
    "OracleError",
    "build_catalog",
    "catalog_path",
    "default_catalog_dir",
    "ensure_catalog",
    "grid_scan",
    "load_catalog",
    "refine",
    "refine_many",
    "save_catalog",
]

log = logging.getLogger(__name__)

DEDUP_RADIUS = 0.01
DEFAULT_TOLERANCE = 1e-7
STRICT_COUNT = ("f1", "f2", "f3", "f6", "example")
# f6's declared optima are its global maxima; everything else uses max/6
GLOBAL_TIER = ("f6",)
_GLOBAL_TIER_RTOL = 1e-6
_MAX_SWEEPS = 100_000


class OracleError(RuntimeError):
    """The oracle produced a catalog that contradicts the function's metadata."""


Target = Union[str, Callable[[np.ndarray], np.ndarray]]


def _resolve(target: Target, bounds: Optional[SearchBounds]):
    """Return a vectorized fitness (maximization sense) and its bounds."""
    if isinstance(target, str):
        spec = spec_of(target)
        sign, fn = spec.sign, spec.function
        return (lambda x: sign * fn(x)), spec.bounds
    if bounds is None:
        raise ValueError("bounds are required when the target is a callable")
    return target, bounds


def default_resolution(id: str) -> int:
    if id == "f8":
        return 2400
    return 2000 if spec_of(id).dimension == 1 else 700


def _grid_axes(bounds: SearchBounds, n: int) -> list[np.ndarray]:
    return [np.linspace(lo, hi, n) for lo, hi in zip(bounds.lower, bounds.upper)]


def grid_scan(target: Target, points_per_dim: int, bounds: Optional[SearchBounds] = None) -> np.ndarray:
    """Grid points whose value is >= every grid neighbour.

    Neighbourhoods are the 2 adjacent points in 1D and the 8 surrounding
    points in 2D; points on the edge simply have fewer neighbours. Returns an
    ``(k, D)`` array.
    """
    if points_per_dim < 100:
        raise ValueError("points_per_dim must be at least 100")
    fn, bounds = _resolve(target, bounds)
    axes = _grid_axes(bounds, points_per_dim)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = np.asarray(fn(mesh), dtype=float)
    if values.shape != mesh.shape[:-1]:
        values = np.broadcast_to(values, mesh.shape[:-1])
    neighbourhood_max = ndimage.maximum_filter(values, size=3, mode="constant", cval=-np.inf)
    return mesh[values >= neighbourhood_max]


def refine_many(
    fn: Callable[[np.ndarray], np.ndarray],
    bounds: SearchBounds,
    starts: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
    initial_step: Optional[float] = None,
):
    """Coordinate pattern search run on many start points at once.

    Each point tries ``+step`` then ``-step`` along every axis and moves on
    any improvement. A sweep without a move halves the step, never below
    ``tolerance``; a sweep without a move at ``step == tolerance`` ends that
    point's search. Points never leave ``bounds``.
    """
    x = np.array(starts, dtype=float, ndmin=2)
    n, dim = x.shape
    if initial_step is None:
        initial_step = 1e-3 * float(np.max(bounds.width))
    fx = np.asarray(fn(x), dtype=float).reshape(n)
    step = np.full(n, max(float(initial_step), tolerance))
    active = np.ones(n, dtype=bool)
    for _ in range(_MAX_SWEEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        moved = np.zeros(idx.size, dtype=bool)
        for j in range(dim):
            pending = np.ones(idx.size, dtype=bool)
            for sign in (1.0, -1.0):
                rows = np.flatnonzero(pending)
                if rows.size == 0:
                    break
                trial = x[idx[rows]]
                trial[:, j] = np.clip(
                    trial[:, j] + sign * step[idx[rows]], bounds.lower[j], bounds.upper[j]
                )
                ft = np.asarray(fn(trial), dtype=float).reshape(rows.size)
                better = ft > fx[idx[rows]]
                won = idx[rows[better]]
                x[won] = trial[better]
                fx[won] = ft[better]
                moved[rows[better]] = True
                pending[rows[better]] = False
        stuck = idx[~moved]
        finished = step[stuck] <= tolerance
        active[stuck[finished]] = False
        shrink = stuck[~finished]
        step[shrink] = np.maximum(step[shrink] / 2.0, tolerance)
    else:
        log.warning("pattern search hit the sweep limit with %d points active", active.sum())
    return x, fx


def refine(
    target: Target,
    start,
    tolerance: float = DEFAULT_TOLERANCE,
    initial_step: Optional[float] = None,
    bounds: Optional[SearchBounds] = None,
):
    """Polish one start point; returns ``(position, value)``."""
    fn, bounds = _resolve(target, bounds)
    start = np.asarray(start, dtype=float).reshape(1, -1)
    if not bounds.contains(start[0]):
        raise ValueError("start point lies outside the bounds")
    x, fx = refine_many(fn, bounds, start, tolerance, initial_step)
    return x[0], float(fx[0])


def _deduplicate(positions: np.ndarray, values: np.ndarray, radius: float) -> np.ndarray:
    """Indices of a greedy best-first subset with pairwise spacing >= radius."""
    order = np.lexsort((*positions.T[::-1], -values))
    tree = cKDTree(positions)
    neighbours = tree.query_ball_point(positions, r=radius * (1 - 1e-12))
    taken = np.zeros(len(positions), dtype=bool)
    keep = []
    for i in order:
        if taken[i]:
            continue
        keep.append(i)
        taken[neighbours[i]] = True
    return np.array(keep, dtype=int)


def significance_cutoff(values: np.ndarray, rule: str) -> float:
    """Threshold a maximum must exceed (``threshold``) or reach (``global``)."""
    best, worst = float(values.max()), float(values.min())
    if rule == "global":
        return best - _GLOBAL_TIER_RTOL * max(1.0, abs(best))
    if best > 0:
        return best / 6.0
    return worst + (best - worst) / 6.0


@dataclass
class OptimaCatalog:
    objective_id: str
    positions: np.ndarray
    values: np.ndarray
    resolution: int
    refine_tolerance: float
    cutoff: float
    cutoff_rule: str = "threshold"
    _tree: Optional[cKDTree] = field(default=None, init=False, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def optima(self) -> list[tuple[np.ndarray, float]]:
        return [(p.copy(), float(v)) for p, v in zip(self.positions, self.values)]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.positions)
        return self._tree

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tree"] = None
        return state


def build_catalog(
    id: str, points_per_dim: Optional[int] = None, tolerance: float = DEFAULT_TOLERANCE
) -> OptimaCatalog:
    """Scan, refine, deduplicate and filter the maxima of benchmark ``id``.

    Raises ``OracleError`` when a function with an exactly known optima count
    (f1, f2, f3, f6, example) yields a different count.
    """
    spec = spec_of(id)
    n = points_per_dim or default_resolution(id)
    fn, bounds = _resolve(id, None)
    candidates = grid_scan(id, n)
    spacing = float(np.max(bounds.width)) / (n - 1)
    positions, values = refine_many(fn, bounds, candidates, tolerance, initial_step=spacing)
    keep = _deduplicate(positions, values, DEDUP_RADIUS)
    positions, values = positions[keep], values[keep]

    rule = "global" if id in GLOBAL_TIER else "threshold"
    cutoff = significance_cutoff(values, rule)
    significant = values >= cutoff if rule == "global" else values > cutoff
    positions, values = positions[significant], values[significant]

    order = np.lexsort(positions.T[::-1])
    catalog = OptimaCatalog(
        objective_id=id,
        positions=positions[order],
        values=values[order],
        resolution=n,
        refine_tolerance=tolerance,
        cutoff=cutoff,
        cutoff_rule=rule,
    )
    log.info("%s: %d candidates -> %d optima (cutoff %.6g)", id, len(candidates), len(catalog), cutoff)
    if id in STRICT_COUNT and len(catalog) != spec.declared_optima_count:
        raise OracleError(
            f"{id}: oracle found {len(catalog)} optima, expected {spec.declared_optima_count}"
        )
    return catalog


def save_catalog(catalog: OptimaCatalog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = catalog.positions.shape[1]
    lines = [
        "# cabopt optima catalog",
        f"# objective={catalog.objective_id}",
        f"# dimension={dim}",
        f"# resolution={catalog.resolution}",
        f"# refine_tolerance={catalog.refine_tolerance!r}",
        f"# cutoff_rule={catalog.cutoff_rule}",
        f"# cutoff={catalog.cutoff!r}",
        "\t".join(["objective", *(f"x{j + 1}" for j in range(dim)), "value"]),
    ]
    for pos, val in zip(catalog.positions, catalog.values):
        lines.append("\t".join([catalog.objective_id, *(repr(float(c)) for c in pos), repr(float(val))]))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def load_catalog(path) -> OptimaCatalog:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key] = value
            elif line and not line.startswith("objective\t"):
                rows.append(line.split("\t"))
    dim = int(meta["dimension"])
    data = np.array([[float(v) for v in row[1:]] for row in rows], dtype=float).reshape(-1, dim + 1)
    return OptimaCatalog(
        objective_id=meta["objective"],
        positions=data[:, :dim],
        values=data[:, dim],
        resolution=int(meta["resolution"]),
        refine_tolerance=float(meta["refine_tolerance"]),
        cutoff=float(meta["cutoff"]),
        cutoff_rule=meta.get("cutoff_rule", "threshold"),
    )


def default_catalog_dir() -> Path:
    return Path(os.environ.get("CABOPT_CATALOG_DIR", "catalogs"))


def catalog_path(id: str, directory=None) -> Path:
    return Path(directory or default_catalog_dir()) / f"{id}.tsv"


def ensure_catalog(id: str, directory=None, refresh: bool = False) -> OptimaCatalog:
    """Load the cached catalog for ``id``, building and saving it if needed."""
    spec_of(id)
    path = catalog_path(id, directory)
    if path.exists() and not refresh:
        return load_catalog(path)
    catalog = build_catalog(id)
    save_catalog(catalog, path)
    return catalog


def build_all(directory=None, refresh: bool = False, ids=FUNCTION_IDS) -> dict[str, OptimaCatalog]:
    return {id: ensure_catalog(id, directory, refresh) for id in ids}
