"""Exception hierarchy.

Everything derives from RuntimeError so the CLI can report any failure as a single line.
"""

from typing import Optional


class NovasError(RuntimeError):
    """Base class for all novas errors."""


class DomainError(NovasError, ValueError):
    """A numeric input lies outside its mathematical domain."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class PreconditionError(NovasError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class DegenerateDataError(NovasError):
    """The data carries no variation to work with."""


class DegenerateWindowError(DegenerateDataError):
    """A transform denominator vanished (all relevant history is zero)."""


class CalibrationError(NovasError):
    """No admissible grid point was found, even after order escalation."""

    def __init__(self, message: str, best_objective: float = float("inf"), best=None):
        super().__init__(message)
        self.best_objective = best_objective
        self.best = best


class DegenerateTestError(NovasError):
    """The CW loss differential has no variation, so no statistic exists."""


class PlanError(NovasError):
    """A window plan does not fit the series."""


class ConfigError(NovasError):
    """Invalid experiment configuration."""


class FormatError(NovasError):
    """Malformed input file."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line
