"""Exception types shared by the solvers."""


class SqrtLassoError(Exception):
    """Base class for package errors."""


class UsageError(SqrtLassoError, ValueError):
    """Invalid arguments: dimension mismatch, bad config, bad ordering."""


class NonsmoothRegion(SqrtLassoError, ArithmeticError):
    """Residual norm fell below the smoothness floor of the square-root loss.

    Raised by loss evaluations; the solvers catch it and report a
    ``NonsmoothStop`` status instead of propagating.
    """

    def __init__(self, residual_norm, floor):
        self.residual_norm = residual_norm
        self.floor = floor
        super().__init__(
            f"residual norm / sqrt(n) = {residual_norm:.3e} below smooth floor {floor:.3e}"
        )


class ZeroResponse(UsageError):
    """The response vector is identically zero."""


class NonsmoothStop(SqrtLassoError):
    """A multi-problem solve entered the nonsmooth region.

    ``task`` names the offending regression task (CMR) and ``stage`` the
    pathwise stage, when known.
    """

    def __init__(self, message, task=None, stage=None):
        self.task = task
        self.stage = stage
        super().__init__(message)
