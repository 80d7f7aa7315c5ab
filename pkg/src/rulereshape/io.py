"""Delimited-text readers and writers for data, vectors and grid tensors."""

from __future__ import annotations

import csv
import os
from typing import Sequence

import numpy as np

from .blackbox import BlackBoxGrid, grid_orderings
from .errors import ModelParseError
from .shape import ShapeSpec

TENSOR_HEADER = ["i", "k", "v", "value"]


def _open(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ModelParseError(f"cannot read file: {exc.strerror}", str(path)) from None


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelParseError(f"not a number: {text!r}", where) from None


def read_matrix(path, header: bool = False, delimiter: str = ",") -> tuple[np.ndarray, list[str] | None]:
    """Read an n x d numeric table; returns the matrix and column names."""
    names = None
    rows = []
    with _open(path) as fh:
        for lineno, rec in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if header and names is None:
                names = [c.strip() for c in rec]
                continue
            rows.append([_float(c, f"{path}:{lineno}") for c in rec])
    if not rows:
        raise ModelParseError("no data rows", str(path))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ModelParseError(f"rows have differing column counts {sorted(widths)}", str(path))
    if names is not None and len(names) != len(rows[0]):
        raise ModelParseError("header width does not match data", str(path))
    return np.array(rows, dtype=float), names


def read_vector(path, delimiter: str = ",", column: int = 0) -> np.ndarray:
    """One value per row; a non-numeric first row is taken as a header."""
    vals = []
    with _open(path) as fh:
        for lineno, rec in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not rec or not rec[0].strip():
                continue
            try:
                vals.append(float(rec[column]))
            except (ValueError, IndexError):
                if lineno == 1 and not vals:
                    continue
                raise ModelParseError(f"bad value {rec!r}", f"{path}:{lineno}") from None
    return np.array(vals, dtype=float)


def write_table(path_or_fh, header: Sequence[str], rows) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])

    if isinstance(path_or_fh, (str, os.PathLike)):
        with open(path_or_fh, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(path_or_fh)


def write_tensor(path, values: np.ndarray, variables: Sequence[int]) -> None:
    """Write ``values[i, k, r]`` as rows ``(i, k, v, value)``, 1-based, with
    ``v`` the 1-based feature index of ``variables[r]``."""
    n, _, R = values.shape

    def rows():
        for i in range(n):
            for k in range(n):
                for r in range(R):
                    yield i + 1, k + 1, variables[r] + 1, float(values[i, k, r])

    write_table(path, TENSOR_HEADER, rows())


def read_tensor(path, data: np.ndarray, spec: ShapeSpec, delimiter: str = ",") -> BlackBoxGrid:
    """Load a precomputed prediction tensor for the observed ``data``.

    Every ``(i, k, v)`` with ``v`` a constrained feature (1-based) must occur
    exactly once.
    """
    n = data.shape[0]
    spec.validate_dimension(data.shape[1])
    slot = {v + 1: r for r, v in enumerate(spec.variables)}
    R = len(slot)
    values = np.full((n, n, R), np.nan)
    filled = np.zeros((n, n, R), dtype=bool)
    with _open(path) as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        head = next(reader, None)
        if head is None or [c.strip().lower() for c in head] != TENSOR_HEADER:
            raise ModelParseError(f"expected header {','.join(TENSOR_HEADER)}", f"{path}:1")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            where = f"{path}:{lineno}"
            if len(rec) != 4:
                raise ModelParseError(f"expected 4 columns, got {len(rec)}", where)
            try:
                i, k, v = (int(c) for c in rec[:3])
            except ValueError:
                raise ModelParseError(f"bad index in {rec!r}", where) from None
            if not (1 <= i <= n and 1 <= k <= n):
                raise ModelParseError(f"index ({i}, {k}) out of range for n={n}", where)
            if v not in slot:
                raise ModelParseError(f"v={v} is not a constrained feature", where)
            r = slot[v]
            if filled[i - 1, k - 1, r]:
                raise ModelParseError(f"duplicate entry ({i}, {k}, {v})", where)
            values[i - 1, k - 1, r] = _float(rec[3], where)
            filled[i - 1, k - 1, r] = True
    if not filled.all():
        i, k, r = np.argwhere(~filled)[0]
        raise ModelParseError(
            f"missing entry ({i + 1}, {k + 1}, {spec.variables[r] + 1})", str(path))
    coords, orderings = grid_orderings(data, spec)
    return BlackBoxGrid(values, coords, orderings, spec.variables)
