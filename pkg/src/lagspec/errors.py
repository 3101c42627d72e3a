"""Exception hierarchy shared by the numerical modules and the CLI."""


class LagspecError(Exception):
    """Base class for all package errors."""


class NumericalError(LagspecError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class BranchLostError(NumericalError):
    """No admissible root for a branch selector.

    The rejected candidates are kept on ``candidates`` so callers can
    inspect what the polynomial actually offered.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class ConvergenceError(NumericalError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, x=None, residual_norm=float("nan")):
        super().__init__(message)
        self.x = x
        self.residual_norm = residual_norm


class ContinuationError(ConvergenceError):
    """Continuation in a regulator or a parameter broke down."""

    def __init__(self, message, x=None, residual_norm=float("nan"), last_ok=None):
        super().__init__(message, x=x, residual_norm=residual_norm)
        self.last_ok = last_ok


class SingularPointError(NumericalError):
    """Implicit differentiation hit a vanishing derivative."""


class PoleError(NumericalError, ZeroDivisionError):
    """A transform was evaluated at one of its poles."""


class ResolutionError(NumericalError):
    """Finite-difference estimate is not stable under grid refinement."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not meet its tolerance."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class SingularCovarianceError(NumericalError):
    """Equal-time covariance cannot be inverted (whitening needs N < T)."""
