"""Exception taxonomy shared by all modules."""


class FpeitError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(FpeitError, ValueError):
    """Malformed or inconsistent input (bad samples, bad config, non-positive field)."""


class DomainError(FpeitError, ValueError):
    """Evaluation requested outside the closed unit disk (or an allowed range)."""


class NumericalError(FpeitError, ArithmeticError):
    """A computation produced non-finite or degenerate values."""
