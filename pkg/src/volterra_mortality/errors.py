"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class VolterraMortalityError(Exception):
    """Base class for all package errors."""


class DomainError(VolterraMortalityError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(VolterraMortalityError, ArithmeticError):
    """A numerical method could not reach the requested accuracy."""


class GridError(VolterraMortalityError, ValueError):
    """Two grid functions cannot be combined because their grids differ."""


class DivergenceError(VolterraMortalityError, ArithmeticError):
    """A forward-stepping solver produced a non-finite or exploding value.

    Parameters
    ----------
    message : str
        Human readable description.
    time : float, optional
        Grid time at which the blow-up was detected.
    """

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)
        self.time = time


class InputError(VolterraMortalityError, ValueError):
    """Inputs are inconsistent (ordering, coverage, empty ranges)."""


class ModelError(VolterraMortalityError, ValueError):
    """A model assumption is violated along a path (e.g. negative intensity)."""


class CalibrationError(VolterraMortalityError, RuntimeError):
    """A calibration root could not be bracketed or located."""


class SingularityError(VolterraMortalityError, ZeroDivisionError):
    """A control law hit a vanishing volatility.

    Parameters
    ----------
    message : str
        Human readable description.
    time : float, optional
        Time at which the volatility vanished.
    """

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)
        self.time = time


class ConfigError(VolterraMortalityError, ValueError):
    """Configuration validation failed.

    Parameters
    ----------
    problems : list of str
        One entry per offending field.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
