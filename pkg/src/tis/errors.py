"""Exceptions raised by the tis package."""

from typing import Any


class TisError(Exception):
    """Base class for every error the package raises on purpose."""


class DomainError(TisError, ValueError):
    """An argument lies outside the domain of the operation."""


class SideConditionError(DomainError):
    """A precision spec violates the side condition of an explicit plan formula."""


class UnsupportedModelError(TisError, TypeError):
    """An exact computation was requested for a model without an exact law."""


class InsufficientSamplesError(TisError, ValueError):
    """The sample stream ended before the maximum sample size was reached."""


class SearchExhaustedError(TisError, RuntimeError):
    """No value in the search range produced a certified plan.

    Attributes:
        best: the last certificate evaluated, kept for diagnostics
    """

    def __init__(self, message: str, best: Any = None) -> None:
        super().__init__(message)
        self.best = best


class UnreachableCaseError(TisError, RuntimeError):
    """An outcome fell outside every case of an interval rule."""


class RootBracketError(TisError, ArithmeticError):
    """A defining equation has no sign change on its bracket."""
