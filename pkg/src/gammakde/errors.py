"""Exception hierarchy shared by every module."""


class GammaKDEError(Exception):
    """Base class for all package errors."""


class DomainError(GammaKDEError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class UsageError(GammaKDEError, ValueError):
    """Inputs have the wrong shape, length or count."""


class ConfigurationError(GammaKDEError, ValueError):
    """A configuration value makes the requested computation undefined."""


class FitError(GammaKDEError, ValueError):
    """A parametric start could not be fitted to the sample."""


class SingularWeightError(GammaKDEError, ArithmeticError):
    """The parametric start vanishes at an observation."""


class NumericError(GammaKDEError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    estimate : float, optional
        Best available estimate at the point of failure.
    error : float, optional
        Error bound attached to ``estimate``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DegenerateTermError(NumericError):
    """Every term of a posterior mixture was dropped."""
