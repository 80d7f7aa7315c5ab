"""Centered interval tree over half-open intervals ``(lo, hi]``.

Intervals come from tree split rules: ``x <= t`` routes left, so every cell
is a product of intervals open below and closed above. Two such intervals
overlap iff ``max(lo1, lo2) < min(hi1, hi2)``; in particular ``(-inf, t]``
and ``(t, inf)`` do not. Empty intervals (``lo >= hi``) never overlap
anything and are not stored.
"""

from __future__ import annotations

from typing import Hashable, Iterable

import math

_LEAF_SIZE = 8


def intervals_overlap(lo1: float, hi1: float, lo2: float, hi2: float) -> bool:
    return max(lo1, lo2) < min(hi1, hi2)


class _Node:
    __slots__ = ("center", "by_lo", "by_hi", "left", "right", "bucket")

    def __init__(self):
        self.center = 0.0
        self.by_lo: list = []
        self.by_hi: list = []
        self.left: _Node | None = None
        self.right: _Node | None = None
        self.bucket: list | None = None


def _build(items: list) -> _Node | None:
    if not items:
        return None
    node = _Node()
    if len(items) <= _LEAF_SIZE:
        node.bucket = items
        return node
    ends = sorted(e for lo, hi, _ in items for e in (lo, hi) if math.isfinite(e))
    node.center = ends[len(ends) // 2] if ends else 0.0
    c = node.center
    lefts, rights, here = [], [], []
    for it in items:
        lo, hi, _ = it
        if hi < c:
            lefts.append(it)
        elif lo >= c:
            rights.append(it)
        else:
            here.append(it)
    if len(lefts) == len(items) or len(rights) == len(items):
        node.bucket = items
        return node
    node.by_lo = sorted(here, key=lambda it: it[0])
    node.by_hi = sorted(here, key=lambda it: it[1], reverse=True)
    node.left = _build(lefts)
    node.right = _build(rights)
    return node


class IntervalIndex:
    """Static interval tree answering overlap queries.

    ``items`` are ``(lo, hi, key)`` triples. ``overlapping(lo, hi)`` returns
    the keys of every stored interval overlapping ``(lo, hi]``, sorted, so
    the answer does not depend on insertion order.
    """

    def __init__(self, items: Iterable[tuple[float, float, Hashable]]):
        kept = [(float(lo), float(hi), key) for lo, hi, key in items if lo < hi]
        self._size = len(kept)
        self._root = _build(kept)

    def __len__(self) -> int:
        return self._size

    def overlapping(self, lo: float, hi: float) -> list:
        if not lo < hi:
            return []
        out: list = []
        node = self._root
        stack = [node] if node is not None else []
        while stack:
            node = stack.pop()
            if node.bucket is not None:
                out.extend(k for a, b, k in node.bucket if max(a, lo) < min(b, hi))
                continue
            c = node.center
            if lo < c <= hi:
                out.extend(k for _, _, k in node.by_lo)
            elif hi < c:
                # Stored intervals reach c > hi; they overlap iff they start below hi.
                for a, _, k in node.by_lo:
                    if a >= hi:
                        break
                    out.append(k)
            else:
                # c <= lo: stored intervals start below c; need their end past lo.
                for _, b, k in node.by_hi:
                    if b <= lo:
                        break
                    out.append(k)
            if node.left is not None and lo < c:
                stack.append(node.left)
            if node.right is not None and hi > c:
                stack.append(node.right)
        return sorted(out)
