"""Exception types raised by the library."""


class TumorStabError(Exception):
    """Base class for all library errors."""


class DomainError(TumorStabError, ValueError):
    """Argument outside the domain of a function."""


class AdmissibilityError(TumorStabError):
    """The mean nutrient supply does not exceed the apoptosis threshold."""


class ConvergenceError(TumorStabError):
    """An iterative solver failed to converge or to bracket a root."""


class TrajectoryError(TumorStabError):
    """A radius trajectory left the positive half-line."""


class StabilityError(TumorStabError):
    """A decay rate was requested for a parameter set that is not stable."""


class GridError(TumorStabError, ValueError):
    """A quadrature grid is too coarse for the requested truncation."""


class SingularMatrixError(TumorStabError):
    """A discretised boundary value problem produced a singular matrix."""


class NoConvergence(ConvergenceError):
    """Root finding for the limiting center stopped at ``max_iter``."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual
