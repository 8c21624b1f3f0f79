"""Exception types raised across the package."""


class ConeGamError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ConeGamError, ValueError):
    """Input data or arguments violate a documented precondition."""


class SizeError(InvalidInputError):
    """Problem is too large for an exhaustive routine."""


class ConvergenceError(ConeGamError, RuntimeError):
    """An iterative routine stopped before meeting its stopping rule.

    Attributes
    ----------
    best : object
        Best iterate available when the routine gave up (may be None).
    violation : float
        Size of the remaining optimality violation, when meaningful.
    trace : list
        Per-iteration diagnostics, when the routine records them.
    """

    def __init__(self, message, best=None, violation=float("nan"), trace=None):
        super().__init__(message)
        self.best = best
        self.violation = violation
        self.trace = trace or []
