"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input does not satisfy an operation's precondition."""


class EvaluationError(RuntimeError):
    """A user-supplied function failed or returned non-finite values."""


class UnsupportedOrderError(ValueError):
    """Requested derivative or cumulant order is beyond what is implemented."""


class CFLViolation(ValueError):
    """Explicit time step exceeds the stability bound.

    The suggested step is kept on ``suggested_dt``.
    """

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class GradientMismatchError(ValueError):
    """An analytic gradient disagrees with finite differences."""
