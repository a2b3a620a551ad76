"""Exception hierarchy shared by the estimation and inference modules."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class CalibrationError(ValueError):
    """A critical value cannot be computed for the requested sample size."""


class EstimationError(RuntimeError):
    """A point estimator failed (no root, degenerate sample, gamma <= 0 regime)."""


class FitFailure(EstimationError):
    """An iterative fit did not converge within its iteration budget."""


class ElConvergenceError(RuntimeError):
    """The Lagrange multiplier Newton solve ran out of iterations.

    The partial solution is attached; its ``log_ratio`` is a valid lower
    bound on the true statistic because the dual objective only increases.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ProfileFailure(RuntimeError):
    """Every scale value in the profile bracket was infeasible."""
