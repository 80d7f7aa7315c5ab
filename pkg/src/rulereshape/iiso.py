"""Intersecting isotonic regression.

K sequences are each fit by a non-decreasing sequence, subject to all fits
taking one common value ``c`` at a designated pivot position per sequence.
For fixed ``c`` each sequence is solved by :func:`pivoted_isotonic`, so the
total squared error is a convex piecewise-quadratic function of ``c`` whose
knots are the PAVA block values of the 2K tails. The minimizer is found by a
single sweep over the sorted knots.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidInputError, SolverError
from .isotonic import Blocks, as_finite_array, pava, pava_blocks


@dataclass
class IisoProblem:
    """K vectors and one 1-based pivot index per vector."""

    vectors: list[np.ndarray]
    pivots: list[int]

    def __post_init__(self):
        if len(self.vectors) == 0:
            raise InvalidInputError("IISO problem needs at least one vector")
        if len(self.vectors) != len(self.pivots):
            raise InvalidInputError(
                f"got {len(self.vectors)} vectors but {len(self.pivots)} pivots")
        self.vectors = [as_finite_array(v, f"vectors[{k}]") for k, v in enumerate(self.vectors)]
        pivots = []
        for k, (v, p) in enumerate(zip(self.vectors, self.pivots)):
            if not isinstance(p, (int, np.integer)) or not 1 <= p <= len(v):
                raise InvalidInputError(
                    f"pivots[{k}]={p!r} out of range for vector of length {len(v)}")
            pivots.append(int(p))
        self.pivots = pivots

    @property
    def K(self) -> int:
        return len(self.vectors)


@dataclass
class IisoSolution:
    fitted: list[np.ndarray]
    intersection_value: float
    objective: float
    # Derivative of the objective at each knot visited by the sweep, in
    # sweep order; kept for inspection of the convexity check.
    knot_derivatives: list[float] = field(default_factory=list, repr=False)


def _block_stream(blocks: Blocks) -> Iterator[tuple[float, float, float]]:
    for m, w in zip(blocks.means, blocks.weights):
        yield m, w, m * w


def minimize_clipped_quadratic(
    left_knots: Iterable[tuple[float, float, float]],
    right_knots: Iterable[tuple[float, float, float]],
    base_weight: float,
    base_sum: float,
    derivatives: list[float] | None = None,
) -> float:
    """Minimize a convex piecewise quadratic in one variable ``c``.

    The objective is, up to constants,

        sum_base w (c - p)^2
        + sum_left  w (m - min(m, c))^2 ... (active while c < m)
        + sum_right w (m - max(m, c))^2 ... (active while c > m)

    where base terms are summarized by their total weight and weighted sum.
    Knots are ``(value, weight, value * weight)`` triples and each stream
    must be sorted ascending by value. Half the derivative on any segment is
    ``A * c - B`` with ``A`` the active weight and ``B`` the active weighted
    sum, so each segment has a closed-form stationary point.

    When the active weight is zero on the optimal segment the objective is
    flat there and the segment midpoint is returned.
    """
    left = list(left_knots)
    A = base_weight + sum(w for _, w, _ in left)
    B = base_sum + sum(s for _, _, s in left)

    events = heapq.merge(
        ((m, -1, w, s) for m, w, s in left),
        ((m, 1, w, s) for m, w, s in right_knots),
        key=lambda e: e[0],
    )
    prev = -math.inf
    last_deriv = -math.inf
    for t, sign, w, s in events:
        if A > 0:
            cand = B / A
            if cand <= t:
                return min(max(cand, prev), t)
        else:
            # No active terms: the objective is flat on this segment.
            return 0.5 * (prev + t) if prev > -math.inf else t
        deriv = A * t - B
        if derivatives is not None:
            derivatives.append(deriv)
        scale = max(1.0, abs(A * t), abs(B))
        if deriv < last_deriv - 1e-9 * scale:
            raise SolverError(
                f"objective derivative decreased across knot {t!r} ({last_deriv!r} -> {deriv!r})")
        last_deriv = max(last_deriv, deriv)
        A += sign * w
        B += sign * s
        # Guard drift from repeated add/subtract of identical terms.
        if abs(A) < 1e-12 * max(1.0, base_weight):
            A, B = 0.0, 0.0
        prev = t
    if A > 0:
        return max(B / A, prev)
    return prev if prev > -math.inf else 0.0


def _tails(v: np.ndarray, p: int, weights: np.ndarray | None):
    """Split at 0-based pivot ``p`` and PAVA both tails."""
    if weights is None:
        return pava_blocks(v[:p]), pava_blocks(v[p + 1:])
    return pava_blocks(v[:p], weights[:p]), pava_blocks(v[p + 1:], weights[p + 1:])


def _common_pivot(vectors, pivots) -> float | None:
    """The shared pivot value if every vector is already non-decreasing and
    all pivots agree, else ``None``."""
    c = float(vectors[0][pivots[0]])
    for v, p in zip(vectors, pivots):
        v = np.asarray(v, dtype=float)
        if float(v[p]) != c or np.any(v[1:] < v[:-1]):
            return None
    return c


def solve_weighted(
    vectors: Sequence[np.ndarray],
    pivots: Sequence[int],
    weights: Sequence[np.ndarray] | None = None,
    derivatives: list[float] | None = None,
) -> tuple[list[np.ndarray], float]:
    """Core solver. ``pivots`` are 0-based here; ``weights`` are per-entry
    positive multiplicities (``None`` means all ones).

    Returns the fitted vectors and the intersection value.
    """
    lefts: list[Blocks] = []
    rights: list[Blocks] = []
    base_w = 0.0
    base_s = 0.0
    for k, (v, p) in enumerate(zip(vectors, pivots)):
        w = None if weights is None else np.asarray(weights[k], dtype=float)
        lb, rb = _tails(v, p, w)
        lefts.append(lb)
        rights.append(rb)
        wp = 1.0 if w is None else float(w[p])
        base_w += wp
        base_s += wp * float(v[p])

    # Common pivot value with no tail crossing it: the optimum sits exactly
    # there, and returning it directly avoids rounding in B / A.
    c = _common_pivot(vectors, pivots)
    if c is not None:
        if derivatives is not None:
            derivatives.append(0.0)
        return [np.array(v, dtype=float) for v in vectors], c

    left_stream = heapq.merge(*(_block_stream(b) for b in lefts), key=lambda e: e[0])
    right_stream = heapq.merge(*(_block_stream(b) for b in rights), key=lambda e: e[0])
    c = minimize_clipped_quadratic(left_stream, right_stream, base_w, base_s, derivatives)

    fitted = []
    for v, p, lb, rb in zip(vectors, pivots, lefts, rights):
        out = np.empty(len(v), dtype=float)
        out[:p] = np.minimum(lb.expand(), c) if p else []
        out[p] = c
        out[p + 1:] = np.maximum(rb.expand(), c) if p + 1 < len(v) else []
        fitted.append(out)
    return fitted, c


def solve_iiso(problem: IisoProblem) -> IisoSolution:
    """Exact minimizer of the intersecting isotonic regression problem.

    Time is O(n log K) for n total entries: linear PAVA on every tail, a
    K-way heap merge of the block values, and a linear derivative sweep.
    """
    derivs: list[float] = []
    fitted, c = solve_weighted(problem.vectors, [p - 1 for p in problem.pivots],
                               derivatives=derivs)
    objective = float(sum(np.sum((f - v) ** 2) for f, v in zip(fitted, problem.vectors)))
    return IisoSolution(fitted, float(c), objective, derivs)


def evaluate_g(problem: IisoProblem, c: float) -> float:
    """Total squared error of the best fits whose pivots all equal ``c``."""
    c = float(c)
    total = 0.0
    for v, p in zip(problem.vectors, problem.pivots):
        i = p - 1
        left, right = v[:i], v[i + 1:]
        total += (c - v[i]) ** 2
        total += float(np.sum((left - np.minimum(pava(left), c)) ** 2))
        total += float(np.sum((right - np.maximum(pava(right), c)) ** 2))
    return total
