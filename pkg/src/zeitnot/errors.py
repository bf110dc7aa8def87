"""Exception hierarchy shared by the solvers and the CLI."""


class ZeitnotError(Exception):
    """Base class for all library errors."""


class ParameterError(ZeitnotError, ValueError):
    """Invalid model or solver parameter."""


class NotStochasticError(ParameterError):
    """A matrix built in stochastic mode has a row that does not sum to one."""


class UnsupportedParameterError(ParameterError):
    """The parameter combination is outside what the routine can solve."""


class DomainError(ParameterError):
    """Argument outside the domain of a residual function."""


class NoCrossingError(ZeitnotError):
    """No cutoff satisfies both threshold inequalities.

    ``profile`` holds one :class:`~zeitnot.threshold.ThresholdProbe` per
    scanned cutoff and ``flip`` the first cutoff at which stopping is already
    preferred (``None`` if that never happens).
    """

    def __init__(self, message, profile, flip=None):
        super().__init__(message)
        self.profile = profile
        self.flip = flip


class SizeCapError(ZeitnotError):
    """Exact enumeration refused because the instance is too large."""
