"""Exception hierarchy shared by every toricnet module."""

from __future__ import annotations


class ToricNetError(Exception):
    """Base class for all library errors."""


class ParseError(ToricNetError):
    """Malformed network source. Carries 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class StructureError(ToricNetError):
    """Graph violates the structural rules (self-loops, duplicate edges)."""


class NotWeaklyReversible(ToricNetError):
    pass


class NotInToricLocus(ToricNetError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class SingularSystem(ToricNetError):
    pass


class MaxIterations(ToricNetError):
    def __init__(self, message: str, final_grad_norm: float):
        self.final_grad_norm = final_grad_norm
        super().__init__(message)


class DegenerateBasis(ToricNetError):
    pass


class UnbalancedFlux(ToricNetError):
    def __init__(self, message: str, imbalance: float):
        self.imbalance = imbalance
        super().__init__(message)


class NonPositiveState(ToricNetError, ValueError):
    pass


class StepSizeUnderflow(ToricNetError):
    pass
