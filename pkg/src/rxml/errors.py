"""Exception types shared across the package."""


class RxmlError(Exception):
    """Base class for all package-specific errors."""


class InvalidInput(RxmlError, ValueError):
    """An argument violates a documented precondition."""


class RankDeficient(RxmlError):
    """A matrix that must be full rank is numerically rank deficient."""


class RankDropError(RxmlError):
    """A manifold step left the fixed-rank set; callers should shrink the step."""


class DivergenceError(RxmlError):
    """An iterative solver diverged after exhausting its restart budget."""


class ParseError(RxmlError, ValueError):
    """A data file is malformed. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class VersionError(RxmlError):
    """A persisted model uses an unsupported format version."""


class CorruptModel(RxmlError):
    """A persisted model fails structural validation."""
