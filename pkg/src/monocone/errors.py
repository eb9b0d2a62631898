"""Exception types shared across the package."""

from __future__ import annotations


class MonoconeError(Exception):
    """Base class for every error raised by this package."""


class FamilyFormatError(MonoconeError, ValueError):
    """A family file could not be turned into a valid family."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class ParseError(FamilyFormatError):
    """Grammar violation."""


class SemanticError(FamilyFormatError):
    """Well-formed text describing an invalid family."""


class DimensionMismatch(MonoconeError, ValueError):
    pass


class EvalOverflow(MonoconeError, OverflowError):
    """Evaluation left the float range; use a normalized iteration instead."""


class DimensionTooLarge(MonoconeError, ValueError):
    def __init__(self, n: int, cap: int):
        self.n = n
        self.cap = cap
        super().__init__(f"dimension {n} exceeds the cap of {cap} for this analysis")


class BudgetExceeded(MonoconeError, RuntimeError):
    """The enumeration would visit more frontier entries than allowed.

    ``partial`` holds whatever report had been assembled when the budget ran out.
    """

    def __init__(self, budget: int, partial=None):
        self.budget = budget
        self.partial = partial
        super().__init__(f"node budget of {budget} frontier entries exceeded")
