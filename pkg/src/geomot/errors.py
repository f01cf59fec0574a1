"""Exception types shared across the package."""


class GeomotError(Exception):
    """Base class for all package errors."""


class DimensionError(GeomotError):
    """Shape mismatch, empty input, or ragged data."""


class DegenerateInputError(GeomotError):
    """Input is numerically degenerate (zero-norm rows, NaN/Inf entries)."""


class InsufficientSamplesError(GeomotError):
    """Fewer samples/points than the operation requires."""


class ConnectivityError(GeomotError):
    """Graph is disconnected where a connected graph is required."""

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components or []


class MarginalError(GeomotError):
    """Transport marginals are negative or do not sum to one."""


class ValidationError(GeomotError):
    """Structured input violates a documented contract (asymmetry, bad bound)."""


class MappingError(GeomotError):
    """A label or group id cannot be resolved to a graph node."""


class NumericalError(GeomotError):
    """A computation produced NaN/Inf where finite values are required."""


class SplitError(GeomotError):
    """Dataset splitting cannot satisfy its structural guarantees."""
