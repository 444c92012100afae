"""Trainer exception types."""


class CliptrainError(Exception):
    """Base class for trainer errors."""


class DataError(CliptrainError, ValueError):
    """Dataset artifact missing, malformed, or inconsistent."""


class NumericError(CliptrainError, ArithmeticError):
    """Degenerate numerical input, e.g. a zero-norm feature."""
