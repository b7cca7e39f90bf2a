"""
Exception hierarchy for singlab.
Every error carries the process exit code the CLI maps it to.
"""

from typing import Any, Optional


class SinglabError(Exception):
    """Base class for all lab errors."""

    exit_code = 2


class InputShapeError(SinglabError):
    pass


class WidthMismatchError(SinglabError):
    pass


class ActivationMismatchError(SinglabError):
    pass


class UnsupportedConstructionError(SinglabError):
    pass


class ParameterError(SinglabError):
    pass


class MissingDerivativeError(SinglabError):
    pass


class DomainError(SinglabError):
    pass


class ConfigurationError(SinglabError):
    pass


class InsufficientDataError(SinglabError):
    pass


class DivergenceError(SinglabError):
    """Training produced a non-finite or exploding loss.

    `last_stable` holds the parameters of the last accepted checkpoint so
    callers can still use the partially trained network.
    """

    def __init__(self, message: str, last_stable: Optional[Any] = None, loss: float = float("nan")):
        super().__init__(message)
        self.last_stable = last_stable
        self.loss = loss


class ReportParseError(SinglabError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class BoundViolation(SinglabError):
    """A measured error exceeded its claimed bound under --strict."""

    exit_code = 1
