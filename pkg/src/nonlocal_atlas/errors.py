"""Exception hierarchy shared by every module."""


class AtlasError(Exception):
    """Base class for all library errors."""


class ParameterError(AtlasError, ValueError):
    """A model or mesh parameter lies outside its admissible range."""


class DomainError(AtlasError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConvergenceError(AtlasError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class UniquenessError(ConvergenceError):
    """Upward and downward monotone iterations converged to different fields."""


class NotMonotoneError(AtlasError):
    """A Q table was asked for an inverse but is not monotone on its samples."""


class GMismatchError(AtlasError):
    """A reconstructed solution does not reproduce its fixed point."""


class ConfigError(AtlasError):
    """Invalid run configuration."""


class VerificationError(AtlasError):
    """An inline invariant check failed in verify mode."""
