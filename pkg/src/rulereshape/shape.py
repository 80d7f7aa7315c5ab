"""Monotonicity constraint declarations."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .errors import InvalidInputError


class Direction(str, Enum):
    INCREASING = "inc"
    DECREASING = "dec"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.INCREASING else -1


_ALIASES = {
    "inc": Direction.INCREASING,
    "increasing": Direction.INCREASING,
    "+": Direction.INCREASING,
    "dec": Direction.DECREASING,
    "decreasing": Direction.DECREASING,
    "-": Direction.DECREASING,
}


@dataclass(frozen=True)
class ShapeSpec:
    """Map from 0-based predictor index to monotone direction.

    Iteration order (``variables``) is ascending by index, which fixes the
    layout of the constrained-variable axis in black-box grids.
    """

    constraints: Mapping[int, Direction]

    def __post_init__(self):
        if not self.constraints:
            raise InvalidInputError("shape spec must constrain at least one variable")
        fixed = {}
        for v, d in self.constraints.items():
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise InvalidInputError(f"invalid predictor index {v!r}")
            fixed[v] = d if isinstance(d, Direction) else _parse_direction(d)
        object.__setattr__(self, "constraints", dict(sorted(fixed.items())))

    @property
    def variables(self) -> list[int]:
        return list(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __contains__(self, v: int) -> bool:
        return v in self.constraints

    def direction(self, v: int) -> Direction:
        return self.constraints[v]

    def sign(self, v: int) -> int:
        return self.constraints[v].sign

    def validate_dimension(self, d: int) -> None:
        bad = [v for v in self.constraints if v >= d]
        if bad:
            raise InvalidInputError(
                f"constrained indices {bad} out of range for {d} features")

    def negated(self) -> "ShapeSpec":
        flip = {Direction.INCREASING: Direction.DECREASING,
                Direction.DECREASING: Direction.INCREASING}
        return ShapeSpec({v: flip[d] for v, d in self.constraints.items()})

    def to_string(self) -> str:
        return ",".join(f"{v}:{d.value}" for v, d in self.constraints.items())

    @classmethod
    def parse(cls, text: str, feature_names: Sequence[str] | None = None) -> "ShapeSpec":
        """Parse ``"3:inc,0:dec"``. With ``feature_names`` a column name may
        be used in place of the index (``"bmi:inc"``)."""
        constraints: dict[int, Direction] = {}
        names = {n: i for i, n in enumerate(feature_names or [])}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, direction = part.rpartition(":")
            if not sep or not key:
                raise InvalidInputError(f"bad shape term {part!r}; expected index:inc|dec")
            key = key.strip()
            if key in names:
                v = names[key]
            else:
                try:
                    v = int(key)
                except ValueError:
                    raise InvalidInputError(f"unknown predictor {key!r}") from None
            if v in constraints:
                raise InvalidInputError(f"predictor {key!r} constrained twice")
            constraints[v] = _parse_direction(direction)
        return cls(constraints)


def _parse_direction(text) -> Direction:
    try:
        return _ALIASES[str(text).strip().lower()]
    except KeyError:
        raise InvalidInputError(f"unknown direction {text!r}; use inc or dec") from None
