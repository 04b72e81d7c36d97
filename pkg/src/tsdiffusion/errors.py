"""Exception hierarchy shared across the package."""


class TSDiffusionError(Exception):
    """Base class for all package errors."""


class ShapeError(TSDiffusionError, ValueError):
    """Array dimensions are inconsistent."""


class ConfigurationError(TSDiffusionError, ValueError):
    """Simulation or experiment settings are inconsistent."""


class CovarianceError(TSDiffusionError, ValueError):
    """A covariance or precision matrix is not symmetric positive definite."""


class StabilityError(TSDiffusionError, ValueError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


class ConditionError(TSDiffusionError, ArithmeticError):
    """A matrix is too ill-conditioned for the requested operation."""


class DomainError(TSDiffusionError, ValueError):
    """An argument lies outside the domain of a function."""


class PairingError(TSDiffusionError, ValueError):
    """Two trajectory logs cannot be compared (grids or noise differ)."""


class SolverError(TSDiffusionError, RuntimeError):
    """An iterative solver failed; ``residual`` holds the last residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class SchemaError(TSDiffusionError, ValueError):
    """A configuration or CSV file does not follow the expected layout."""
