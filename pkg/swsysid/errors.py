"""Exceptions raised across swsysid."""


class SwsysidError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SwsysidError, ValueError):
    """Bad shapes, non-finite entries, asymmetric input or out-of-range indices."""


class ConfigError(InvalidInputError):
    """An experiment configuration failed validation."""


class NumericalFailureError(SwsysidError, ArithmeticError):
    """A numerically broken intermediate, e.g. a non-positive update denominator."""


class NotIdentifiableError(SwsysidError, ValueError):
    """A bound is undefined because a mode has not collected enough data yet."""


class InstabilityError(SwsysidError):
    """The simulated state left the representable range."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ExperimentDivergedError(InstabilityError):
    """Too many Monte Carlo runs diverged for the experiment to be meaningful."""

    def __init__(self, message, diverged, runs, margin):
        super().__init__(message)
        self.diverged = diverged
        self.runs = runs
        self.margin = margin


class ArtifactIOError(SwsysidError, OSError):
    """Reading or writing an artifact failed; the message names the path."""
