"""Exception and warning types shared across the package."""


class QhydroError(Exception):
    """Base class for all package errors."""


class DomainError(QhydroError, ValueError):
    """An input lies outside the physical/mathematical domain of an operation."""


class UnrealizableMomentsError(DomainError):
    """A (n, W) pair cannot be the moments of any maximum-entropy state."""


class QuadratureConvergenceError(QhydroError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the partial result so callers can inspect how far it got.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class NonConvergenceError(QhydroError):
    """Newton iteration did not converge; `last` holds the final iterate."""

    def __init__(self, message, last=None, residual=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class ConditioningError(QhydroError):
    """A linear system was numerically singular."""


class UndefinedRelaxationError(QhydroError):
    """Total momentum production vanished; no relaxation time is defined."""


class CompatibilityWarning(UserWarning):
    """Multipliers violate the drift-magnitude bound of the closure expansion."""


class GridAccuracyWarning(UserWarning):
    """Finite-difference stencil error estimated above tolerance (grid too coarse)."""
