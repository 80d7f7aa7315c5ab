"""Exception types raised across the package."""


class ReshapeError(Exception):
    """Base class for all errors raised by rulereshape."""


class InvalidInputError(ReshapeError, ValueError):
    """Arguments violate an operation's preconditions."""


class InvalidModelError(ReshapeError, ValueError):
    """A prediction rule produced an unusable value (NaN, inf, out of range)."""


class ModelParseError(ReshapeError):
    """A model, tensor or data file could not be parsed.

    ``location`` is a short human-readable pointer such as
    ``"trees[2].nodes[5]"`` or ``"line 14"``.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class SolverError(ReshapeError, RuntimeError):
    """A solver produced a result that fails its own postconditions."""
