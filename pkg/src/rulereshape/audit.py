"""Monotonicity audits and accuracy metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .blackbox import as_batch_predictor
from .errors import InvalidInputError, InvalidModelError
from .shape import ShapeSpec

AUDIT_TOL = 1e-12
MAX_WITNESSES = 10


@dataclass
class AuditConfig:
    """Random sweep design.

    ``feature_ranges`` is one ``(lo, hi)`` per feature; base points are drawn
    uniformly from the box. ``extra_points`` adds sweep positions per
    constrained variable (model thresholds, typically).
    """

    spec: ShapeSpec
    feature_ranges: Sequence[tuple[float, float]]
    probes: int = 100
    grid_size: int = 50
    seed: int = 0
    extra_points: Mapping[int, Sequence[float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.probes < 1:
            raise InvalidInputError("probes must be >= 1")
        if self.grid_size < 2:
            raise InvalidInputError("grid_size must be >= 2")
        ranges = [(float(lo), float(hi)) for lo, hi in self.feature_ranges]
        for j, (lo, hi) in enumerate(ranges):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidInputError(f"feature range {j} must satisfy lo < hi, got ({lo}, {hi})")
        self.feature_ranges = ranges
        self.spec.validate_dimension(len(ranges))

    def sweep(self, v: int) -> np.ndarray:
        lo, hi = self.feature_ranges[v]
        pts = np.linspace(lo, hi, self.grid_size)
        extra = np.asarray(self.extra_points.get(v, ()), dtype=float)
        return np.unique(np.concatenate([pts, extra]))


@dataclass
class AuditResult:
    violations: int
    total_checks: int
    worst_violation: float
    witnesses: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_points(thresholds, scale: float = 2.0 ** -40) -> np.ndarray:
    """Every threshold plus points just below and just above it."""
    t = np.asarray(thresholds, dtype=float)
    off = np.maximum(np.abs(t), 1.0) * scale
    return np.unique(np.concatenate([t, t - off, t + off]))


def _count(values: np.ndarray, sign: int, same: np.ndarray | None = None):
    """Adjacent-pair violations along the last axis of ``values``.

    ``same[j]`` marks sweep positions j, j+1 with equal coordinates; those
    must carry equal values.
    """
    diff = sign * np.diff(values, axis=-1)
    drop = -diff
    if same is not None and same.any():
        drop = np.where(same, np.abs(diff), drop)
    bad = drop > AUDIT_TOL
    return bad, drop


def audit_monotonicity(predict_fn, config: AuditConfig) -> AuditResult:
    """Sweep every constrained variable through its grid at random base points
    and count adjacent-pair decreases (increases for decreasing variables)
    larger than 1e-12."""
    predict = as_batch_predictor(predict_fn)
    rng = np.random.default_rng(config.seed)
    ranges = np.array(config.feature_ranges)
    d = len(ranges)
    base = rng.uniform(ranges[:, 0], ranges[:, 1], size=(config.probes, d))
    violations = 0
    checks = 0
    worst = 0.0
    witnesses: list[dict[str, Any]] = []
    for v in config.spec.variables:
        sign = config.spec.sign(v)
        grid = config.sweep(v)
        G = len(grid)
        pts = np.repeat(base, G, axis=0)
        pts[:, v] = np.tile(grid, config.probes)
        vals = np.asarray(predict(pts), dtype=float).reshape(config.probes, G)
        if not np.all(np.isfinite(vals)):
            p, g = np.argwhere(~np.isfinite(vals))[0]
            point = base[p].copy()
            point[v] = grid[g]
            raise InvalidModelError(f"non-finite prediction at {point.tolist()}")
        bad, drop = _count(vals, sign)
        checks += bad.size
        violations += int(bad.sum())
        if bad.any():
            worst = max(worst, float(drop[bad].max()))
            for p, g in np.argwhere(bad):
                if len(witnesses) >= MAX_WITNESSES:
                    break
                witnesses.append({"point": base[p].tolist(), "variable": int(v),
                                  "positions": [float(grid[g]), float(grid[g + 1])],
                                  "values": [float(vals[p, g]), float(vals[p, g + 1])]})
    return AuditResult(violations, checks, worst, witnesses)


def audit_forest(model, spec: ShapeSpec, feature_ranges=None, probes: int = 100,
                 grid_size: int = 50, seed: int = 0) -> AuditResult:
    """Threshold-aware audit of a forest.

    Sweeps include every split threshold of the swept variable and points
    just either side of it, so each piecewise-constant step is visited.
    Default ranges span the model's thresholds with a margin of one.
    """
    if feature_ranges is None:
        feature_ranges = default_ranges(model)
    extra = {v: threshold_points(model.thresholds(v)) for v in spec.variables}
    cfg = AuditConfig(spec, feature_ranges, probes, grid_size, seed, extra)
    return audit_monotonicity(model, cfg)


def default_ranges(model) -> list[tuple[float, float]]:
    out = []
    for j in range(model.n_features):
        t = model.thresholds(j)
        out.append((float(t.min()) - 1.0, float(t.max()) + 1.0) if t.size else (-1.0, 1.0))
    return out


def ranges_from_data(X) -> list[tuple[float, float]]:
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    # Constant columns still need a non-degenerate box.
    return [(float(a), float(b)) if a < b else (float(a) - 0.5, float(b) + 0.5)
            for a, b in zip(lo, hi)]


def audit_grid(values: np.ndarray, coords: np.ndarray, spec: ShapeSpec) -> AuditResult:
    """Audit black-box fibers ``values[i, :, r]`` on the grid they live on.

    Positions are read in ascending coordinate order; tied coordinates must
    carry equal values.
    """
    values = np.asarray(values, dtype=float)
    n, _, R = values.shape
    violations = 0
    checks = 0
    worst = 0.0
    witnesses: list[dict[str, Any]] = []
    for r, v in enumerate(spec.variables):
        order = np.argsort(coords[:, r], kind="stable")
        xs = coords[order, r]
        same = xs[1:] == xs[:-1]
        fib = values[:, order, r]
        bad, drop = _count(fib, spec.sign(v), same)
        checks += bad.size
        violations += int(bad.sum())
        if bad.any():
            worst = max(worst, float(drop[bad].max()))
            for i, g in np.argwhere(bad):
                if len(witnesses) >= MAX_WITNESSES:
                    break
                witnesses.append({"point": int(i) + 1, "variable": int(v),
                                  "positions": [int(order[g]) + 1, int(order[g + 1]) + 1],
                                  "values": [float(fib[i, g]), float(fib[i, g + 1])]})
    return AuditResult(violations, checks, worst, witnesses)


# -- metrics ------------------------------------------------------------

def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape != t.shape:
        raise InvalidInputError(f"length mismatch: {p.size} predictions, {t.size} targets")
    if p.size == 0:
        raise InvalidInputError("metrics need at least one value")
    return p, t


def mse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean((p - t) ** 2))


def mape(pred, truth) -> float:
    """Mean of ``|pred - truth| / truth`` as a fraction (not percent)."""
    p, t = _pair(pred, truth)
    zero = np.flatnonzero(t == 0)
    if zero.size:
        raise InvalidInputError(f"mape undefined: truth[{int(zero[0])}] is zero")
    return float(np.mean(np.abs(p - t) / t))


def accuracy(pred_prob, labels, threshold: float = 0.5) -> float:
    """Fraction of labels matched by ``pred_prob > threshold``."""
    p, y = _pair(pred_prob, labels)
    return float(np.mean((p > threshold).astype(float) == (y > 0.5)))


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into ``k`` folds of near-equal size."""
    if k < 1 or n < 1:
        raise InvalidInputError("n and k must be positive")
    if k > n:
        raise InvalidInputError(f"cannot make {k} folds from {n} points")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def fold_summary(values) -> dict[str, float]:
    """Mean of per-fold values with both spread conventions.

    ``sd`` is the fold-level sample standard deviation, ``se`` is ``sd``
    divided by sqrt(k).
    """
    v = np.asarray(values, dtype=float)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "sd": sd, "se": sd / np.sqrt(v.size),
            "folds": v.tolist()}
