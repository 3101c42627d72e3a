"""Spectra and eigenvector correlators of time-lagged correlation matrices."""
from .errors import (
    BranchLostError,
    ContinuationError,
    ConvergenceError,
    LagspecError,
    NumericalError,
    PoleError,
    QuadratureError,
    ResolutionError,
    SingularCovarianceError,
    SingularPointError,
)

__version__ = "0.1.0"

__all__ = [
    "BranchLostError",
    "ContinuationError",
    "ConvergenceError",
    "LagspecError",
    "NumericalError",
    "PoleError",
    "QuadratureError",
    "ResolutionError",
    "SingularCovarianceError",
    "SingularPointError",
    "__version__",
]
