"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematically supported domain."""


class ConfigError(ValueError):
    """A scenario file or parameter set is malformed."""


class SingularSeriesError(ArithmeticError):
    """A truncated series cannot be inverted (near-zero constant term)."""


class ExtractionError(RuntimeError):
    """Coefficient extraction left an imaginary residual above tolerance."""


class NonTerminationError(RuntimeError):
    """A simulated path hit the epoch cap before exiting.

    Carries the partially simulated state for post-mortem inspection.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PrecisionError(RuntimeError):
    """A truncation budget was exhausted before reaching the target tail mass."""


class SweepError(RuntimeError):
    """Too many cells of a payoff sweep failed to evaluate."""
