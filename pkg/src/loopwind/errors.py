"""Exception hierarchy shared by every loopwind module."""


class LoopwindError(Exception):
    """Base class for all errors raised by loopwind."""


class DomainError(LoopwindError, ValueError):
    """An argument lies outside the domain of the requested function."""


class NumericError(LoopwindError, ArithmeticError):
    """A quadrature or series failed to reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is still usable.
    """

    def __init__(self, message, best_estimate=None, abs_error_estimate=None, evaluations=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.abs_error_estimate = abs_error_estimate
        self.evaluations = evaluations


class WindowTooNarrowError(NumericError):
    """The k-window of an index distribution does not close the normalization."""


class UnsupportedGeometryError(LoopwindError, ValueError):
    """The operation is not defined for the requested geometry."""


class SimulationError(LoopwindError, RuntimeError):
    """A Monte Carlo run could not complete (step cascade exhausted)."""


class InsufficientStatisticsError(SimulationError):
    """Too few paths landed in the conditioning bin."""
