"""Shared exception types."""


class SpikecamError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(SpikecamError, ValueError):
    """Malformed container: bad magic, bad header fields, trailing junk."""


class TruncatedError(FormatError):
    """Payload shorter than the header claims."""


class ShapeError(SpikecamError, ValueError):
    """Image or stream dimensions violate an operation's requirements."""


class ParameterError(SpikecamError, ValueError):
    """Operation parameter outside its valid range."""


class FitError(SpikecamError, ValueError):
    """Distribution fit attempted on degenerate data."""


class NumericError(SpikecamError, ArithmeticError):
    """Numerical failure, e.g. a singular covariance."""


class PipelineError(SpikecamError, RuntimeError):
    """Dataset pipeline failure; ``causes`` maps method or clip name to the
    underlying exception."""

    def __init__(self, message: str, causes: dict | None = None):
        super().__init__(message)
        self.causes = dict(causes or {})
