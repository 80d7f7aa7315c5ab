"""Chain isotonic regression.

``pava`` projects a sequence onto the cone of non-decreasing sequences in
the Euclidean norm. ``pivoted_isotonic`` solves the same projection with one
position pinned to a given value.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError


class Blocks(NamedTuple):
    """Pooled blocks of a PAVA fit, in left-to-right order.

    ``means[j]`` is the fitted value of block ``j``, ``weights[j]`` its total
    weight and ``sizes[j]`` the number of consecutive entries it covers.
    """

    means: list[float]
    weights: list[float]
    sizes: list[int]

    def expand(self) -> np.ndarray:
        return np.repeat(np.asarray(self.means, dtype=float), self.sizes)


def as_finite_array(values: Sequence[float], name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InvalidInputError(f"{name}[{bad}] is not finite ({arr[bad]!r})")
    return arr


def pava_blocks(values: np.ndarray, weights: np.ndarray | None = None) -> Blocks:
    """Run pool-adjacent-violators and return the resulting blocks.

    Adjacent blocks are merged only on a strict decrease, so a sequence that
    is already non-decreasing comes back as singleton blocks with its
    original values untouched. ``weights`` are positive multiplicities; the
    public API only uses unit weights, the black-box grid uses integer
    multiplicities when it collapses tied coordinates.
    """
    n = len(values)
    means: list[float] = []
    wts: list[float] = []
    sums: list[float] = []
    sizes: list[int] = []
    vals = values.tolist()
    ws = [1.0] * n if weights is None else np.asarray(weights, dtype=float).tolist()
    for x, w in zip(vals, ws):
        s = x * w
        m = x
        size = 1
        while means and means[-1] > m:
            s += sums.pop()
            w += wts.pop()
            size += sizes.pop()
            means.pop()
            m = s / w
        means.append(m)
        wts.append(w)
        sums.append(s)
        sizes.append(size)
    return Blocks(means, wts, sizes)


def pava(seq: Sequence[float]) -> np.ndarray:
    """Least-squares non-decreasing fit of ``seq`` (uniform weights).

    Runs in linear time. Empty and length-one inputs are returned unchanged.

    >>> pava([3.0, 1.0, 2.0]).tolist()
    [2.0, 2.0, 2.0]
    """
    arr = as_finite_array(seq, "seq")
    if len(arr) <= 1:
        return arr.copy()
    return pava_blocks(arr).expand()


def pivoted_isotonic(values: Sequence[float], pivot_index: int, pivot_value: float) -> np.ndarray:
    """Non-decreasing least-squares fit with ``out[pivot_index] == pivot_value``.

    ``pivot_index`` is 1-based. Each tail is fit by PAVA on its own, then the
    left tail is clipped from above and the right tail from below at the
    pivot value.
    """
    arr = as_finite_array(values)
    d = len(arr)
    if not isinstance(pivot_index, (int, np.integer)) or not 1 <= pivot_index <= d:
        raise InvalidInputError(f"pivot_index must be in [1, {d}], got {pivot_index!r}")
    c = float(pivot_value)
    if not np.isfinite(c):
        raise InvalidInputError(f"pivot_value must be finite, got {pivot_value!r}")
    p = int(pivot_index) - 1
    out = np.empty(d, dtype=float)
    out[:p] = np.minimum(pava(arr[:p]), c)
    out[p] = c
    out[p + 1:] = np.maximum(pava(arr[p + 1:]), c)
    return out
