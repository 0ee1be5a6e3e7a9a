"""Exception types raised across the package."""


class HspecError(Exception):
    """Base class for all package errors."""


class DomainError(HspecError, ValueError):
    """A function was evaluated outside the set where it is finite."""


class NotPositiveDefinite(HspecError, ValueError):
    """A constructed covariance has a non-positive eigenvalue."""


class NoConvergence(HspecError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class NoCriticalPoint(HspecError, RuntimeError):
    """The bulk-edge scan found no sign change of the derivative."""

    def __init__(self, message, alpha_max=None):
        super().__init__(message)
        self.alpha_max = alpha_max


class BelowThreshold(HspecError):
    """The SNR does not exceed the weak-recovery threshold."""


class Diverged(HspecError, RuntimeError):
    """An AMP iterate blew up."""


class ConfigError(HspecError, ValueError):
    """An experiment configuration is malformed."""
