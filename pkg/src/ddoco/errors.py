"""Exception types raised across the package."""

from __future__ import annotations


class DdocoError(Exception):
    """Base class. ``step`` is filled in when the error escapes a closed-loop step."""

    step: int | None = None


class InvalidInputError(DdocoError, ValueError):
    pass


class InvalidDepthError(InvalidInputError):
    pass


class InvalidIndexError(InvalidInputError, IndexError):
    pass


class InfeasibleError(DdocoError):
    """A linear system that should be consistent is not (residual above tolerance)."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class InfeasibleOutputError(InfeasibleError):
    pass


class InconsistentWindowError(InfeasibleError):
    pass


class InsufficientExcitationError(DdocoError):
    def __init__(self, order: int, rank: int, required: int):
        super().__init__(
            f"data input is not persistently exciting of order {order} "
            f"(rank {rank}, need {required})"
        )
        self.order = order
        self.rank = rank
        self.required = required


class DataTooShortError(DdocoError):
    pass


class InvalidSystemError(DdocoError):
    pass


class NoSteadyStateError(DdocoError):
    pass


class NumericalFailureError(DdocoError):
    pass


class GenerationFailureError(DdocoError):
    pass
