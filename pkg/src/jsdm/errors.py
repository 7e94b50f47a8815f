"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a scenario configuration is malformed or inconsistent."""


class FeasibilityError(ValueError):
    """Raised when a requested decomposition or dimensioning cannot be met."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularityWarning(UserWarning):
    """Emitted when an evaluation point hits an integrable singularity."""
