from __future__ import annotations

from typing import List, Sequence


class EpdwError(Exception):
    """Base class for every error raised by epdwave."""


class SpecfunDomainError(EpdwError, ValueError):
    pass


class OrderTooCloseToIntegerError(SpecfunDomainError):
    pass


class PropagatorDomainError(EpdwError, ValueError):
    pass


class NonFiniteError(EpdwError, ArithmeticError):
    pass


class StepSizeUnderflowError(EpdwError, RuntimeError):
    pass


class GridMismatchError(EpdwError, ValueError):
    pass


class QuadratureError(EpdwError, RuntimeError):
    """Duhamel quadrature did not reach its tolerance; `history` holds the estimate per level."""

    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(message)
        self.history: List[float] = list(history)


class MissingForcingError(EpdwError, ValueError):
    pass


class ConfigError(EpdwError, ValueError):
    pass


class FitError(EpdwError, ValueError):
    pass
