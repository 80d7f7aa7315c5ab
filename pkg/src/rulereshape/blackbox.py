"""Black-box reshaping of an arbitrary prediction rule.

For every observed point ``x^i`` and every constrained variable ``v`` the
rule is evaluated on the ``n`` synthetic points obtained by replacing
coordinate ``v`` of ``x^i`` with each observed ``x^k_v``. The values are
held in a tensor ``F[i, k, r]`` where ``r`` indexes ``spec.variables``.
Reshaping projects every fiber ``F[i, :, r]`` onto the monotone cone of its
variable, with all fibers of point ``i`` forced to agree at ``k = i``.
The problem separates over ``i`` and each piece is an intersecting isotonic
regression.

Monotonicity is only certified on the constructed points; reshaped values
are defined for the ``n`` observed points and nowhere else.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterator

import numpy as np

from .errors import InvalidInputError, InvalidModelError, SolverError
from .iiso import solve_weighted
from .isotonic import pava_blocks
from .shape import ShapeSpec

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 200_000_000
CONSISTENCY_TOL = 1e-9

BatchPredictor = Callable[[np.ndarray], np.ndarray]


@dataclass
class BlackBoxGrid:
    """Predictions on the synthetic test points.

    ``values[i, k, r]`` is the prediction at ``x^i`` with coordinate
    ``spec.variables[r]`` replaced by ``x^k`` of that coordinate.
    ``coords[:, r]`` holds the observed coordinates of that variable and
    ``orderings[r]`` the stable argsort of ``coords[:, r]`` (ties broken by
    observation index).
    """

    values: np.ndarray
    coords: np.ndarray
    orderings: list[np.ndarray]
    variables: list[int]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def R(self) -> int:
        return self.values.shape[2]

    def check(self) -> None:
        n, n2, R = self.values.shape
        if n != n2 or self.coords.shape != (n, R) or len(self.orderings) != R:
            raise InvalidInputError(
                f"inconsistent grid shapes: values {self.values.shape}, coords {self.coords.shape}")
        if not np.all(np.isfinite(self.values)):
            i, k, r = np.argwhere(~np.isfinite(self.values))[0]
            raise InvalidModelError(
                f"non-finite grid value at i={i + 1}, k={k + 1}, v={self.variables[r]}")


@dataclass
class ReshapedGrid:
    values: np.ndarray
    predictions: np.ndarray
    objectives: np.ndarray
    variables: list[int]

    @property
    def objective(self) -> float:
        return float(np.sum(self.objectives))


def as_batch_predictor(predictor: Any) -> BatchPredictor:
    """Accept a callable on ``(m, d)`` arrays or any object with ``predict``."""
    if hasattr(predictor, "predict"):
        return predictor.predict
    if callable(predictor):
        return predictor
    raise InvalidInputError(f"cannot use {type(predictor).__name__} as a predictor")


def _check_data(data, spec: ShapeSpec) -> np.ndarray:
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidInputError(f"data must be an n x d matrix with n >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("data contains non-finite entries")
    spec.validate_dimension(X.shape[1])
    return X


def grid_orderings(X: np.ndarray, spec: ShapeSpec) -> tuple[np.ndarray, list[np.ndarray]]:
    coords = X[:, spec.variables].copy()
    orderings = [np.argsort(coords[:, r], kind="stable") for r in range(coords.shape[1])]
    return coords, orderings


def grid_row(X: np.ndarray, predict: BatchPredictor, spec: ShapeSpec, i: int) -> np.ndarray:
    """Predictions for observed point ``i`` (0-based): an ``(n, R)`` array."""
    n = X.shape[0]
    R = len(spec)
    pts = np.repeat(X[i][None, :], n * R, axis=0)
    for r, v in enumerate(spec.variables):
        pts[r * n:(r + 1) * n, v] = X[:, v]
    out = np.asarray(predict(pts), dtype=float).reshape(R, n).T
    if not np.all(np.isfinite(out)):
        k, r = np.argwhere(~np.isfinite(out))[0]
        raise InvalidModelError(
            f"predictor returned {out[k, r]!r} at i={i + 1}, k={k + 1}, v={spec.variables[r]}")
    return out


def iter_grid_rows(data, predictor, spec: ShapeSpec) -> Iterator[np.ndarray]:
    """Yield ``grid_row`` for i = 0..n-1 without holding the whole tensor."""
    X = _check_data(data, spec)
    predict = as_batch_predictor(predictor)
    for i in range(X.shape[0]):
        yield grid_row(X, predict, spec, i)


def build_grid(data, predictor, spec: ShapeSpec,
               memory_budget: int = DEFAULT_MEMORY_BUDGET) -> BlackBoxGrid:
    X = _check_data(data, spec)
    n = X.shape[0]
    R = len(spec)
    if n * n * R > memory_budget:
        log.warning("black-box grid has %d entries, above the budget of %d; "
                    "consider reshape_streaming", n * n * R, memory_budget)
    predict = as_batch_predictor(predictor)
    values = np.empty((n, n, R), dtype=float)
    for i in range(n):
        values[i] = grid_row(X, predict, spec, i)
    coords, orderings = grid_orderings(X, spec)
    return BlackBoxGrid(values, coords, orderings, spec.variables)


def _tie_groups(sorted_coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and sizes of runs of equal values in a sorted array."""
    n = len(sorted_coords)
    if n == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    change = np.flatnonzero(sorted_coords[1:] != sorted_coords[:-1]) + 1
    starts = np.concatenate(([0], change))
    sizes = np.diff(np.concatenate((starts, [n])))
    return starts, sizes


class _Layout:
    """Per-variable sorting and tie structure shared by all points."""

    def __init__(self, coords: np.ndarray, orderings: list[np.ndarray], signs: list[int]):
        self.orders = []
        self.starts = []
        self.sizes = []
        self.group_of = []
        n = coords.shape[0]
        for r, order in enumerate(orderings):
            starts, sizes = _tie_groups(coords[order, r])
            group_sorted = np.repeat(np.arange(len(starts)), sizes)
            group_of = np.empty(n, dtype=int)
            group_of[order] = group_sorted
            if signs[r] < 0:
                # Non-increasing in x is non-decreasing in reversed order.
                group_of = len(starts) - 1 - group_of
                sizes = sizes[::-1].copy()
                order = order[::-1].copy()
                starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
            self.orders.append(order)
            self.starts.append(starts)
            self.sizes.append(sizes)
            self.group_of.append(group_of)


def _reshape_row(row: np.ndarray, i: int, layout: _Layout) -> np.ndarray:
    R = row.shape[1]
    vecs, wts, pivots = [], [], []
    for r in range(R):
        sorted_vals = row[layout.orders[r], r]
        sizes = layout.sizes[r]
        if len(sizes) == len(sorted_vals):
            means = sorted_vals
        else:
            means = np.add.reduceat(sorted_vals, layout.starts[r]) / sizes
        vecs.append(means)
        wts.append(sizes.astype(float))
        pivots.append(int(layout.group_of[r][i]))

    if R == 1:
        blocks = pava_blocks(vecs[0], None if len(wts[0]) == row.shape[0] else wts[0])
        fitted = [blocks.expand()]
    else:
        fitted, _ = solve_weighted(vecs, pivots, wts)

    out = np.empty_like(row)
    for r in range(R):
        out[layout.orders[r], r] = np.repeat(fitted[r], layout.sizes[r])
    return out


def _reshape_chunk(args):
    rows, idx, layout = args
    return [_reshape_row(row, i, layout) for row, i in zip(rows, idx)]


def reshape_grid(grid: BlackBoxGrid, spec: ShapeSpec, jobs: int = 1) -> ReshapedGrid:
    """Solve the black-box reshaping problem on a precomputed grid.

    Each observed point is an independent intersecting isotonic problem over
    its R fibers. Points with tied coordinates collapse to a single grid
    position per fiber so identical synthetic inputs share one fitted value.
    With a single constrained variable this is plain PAVA per fiber.
    """
    if list(grid.variables) != spec.variables:
        raise InvalidInputError(
            f"grid variables {grid.variables} do not match spec {spec.variables}")
    grid.check()
    layout = _Layout(grid.coords, grid.orderings, [spec.sign(v) for v in spec.variables])
    n = grid.n
    if jobs > 1 and n > 1:
        chunks = np.array_split(np.arange(n), min(jobs * 4, n))
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = ex.map(_reshape_chunk, [(grid.values[c], c, layout) for c in chunks])
            rows = [r for part in parts for r in part]
        values = np.stack(rows)
    else:
        values = np.stack([_reshape_row(grid.values[i], i, layout) for i in range(n)])
    objectives = np.sum((values - grid.values) ** 2, axis=(1, 2))
    rg = ReshapedGrid(values, np.empty(n), objectives, list(spec.variables))
    rg.predictions = reshaped_predictions(rg)
    return rg


def reshaped_predictions(rg: ReshapedGrid) -> np.ndarray:
    """The consistent values ``F*[i, i, .]`` at the observed points."""
    n = rg.values.shape[0]
    diag = rg.values[np.arange(n), np.arange(n), :]
    spread = np.max(diag, axis=1) - np.min(diag, axis=1) if n else np.zeros(0)
    if n and np.max(spread) > CONSISTENCY_TOL:
        i = int(np.argmax(spread))
        raise SolverError(
            f"reshaped grid is inconsistent at point {i + 1}: diagonal values {diag[i].tolist()}")
    return diag[:, 0].copy()


def reshape_streaming(data, predictor, spec: ShapeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Reshape point by point without materializing the full tensor.

    Returns the reshaped predictions and per-point objective values.
    """
    X = _check_data(data, spec)
    coords, orderings = grid_orderings(X, spec)
    layout = _Layout(coords, orderings, [spec.sign(v) for v in spec.variables])
    predict = as_batch_predictor(predictor)
    n = X.shape[0]
    preds = np.empty(n)
    objs = np.empty(n)
    for i in range(n):
        row = grid_row(X, predict, spec, i)
        out = _reshape_row(row, i, layout)
        if np.ptp(out[i]) > CONSISTENCY_TOL:
            raise SolverError(f"reshaped grid is inconsistent at point {i + 1}")
        preds[i] = out[i, 0]
        objs[i] = float(np.sum((out - row) ** 2))
    return preds, objs
