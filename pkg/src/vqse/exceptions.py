"""Exception types shared across the package."""


class VqseError(Exception):
    """Base class for errors raised by this package."""


class ConvergenceError(VqseError):
    """SCF (or another iterative solver) failed to converge.

    Carries the last energy reached so callers can inspect how close
    the iteration got.
    """

    def __init__(self, message, last_energy=None):
        super().__init__(message)
        self.last_energy = last_energy


class ParseError(VqseError):
    """Malformed input file; ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PartitionError(VqseError):
    """Core/active/virtual orbital sets overlap or are inconsistent."""


class DegenerateMetricError(VqseError):
    """All overlap-metric eigenvalues fell below the truncation threshold."""
