"""Exception types shared across the package."""


class BandflowError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BandflowError):
    """Input lies outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """A rational function was evaluated at (or too close to) a pole."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"evaluation at pole t={t!r}")


class IllConditionedError(BandflowError):
    """A linear solve was rejected because the node set is too degenerate."""

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(message or f"ill-conditioned solve (condition ~ {condition:.3e})")


class ForbiddenPointError(DomainError):
    """A coordinate sits in the classically forbidden region."""

    def __init__(self, index, value, message=None):
        self.index = index
        self.value = value
        super().__init__(
            message
            or f"classically forbidden point at coordinate {index}: f*R ratio {value:.6e} < 0"
        )


class InterlacingError(DomainError):
    """Coordinates violate the required interlacing with the parameters."""


class CollisionError(BandflowError):
    """Two separation coordinates collided; the diagonal chart broke down."""

    def __init__(self, x, q, message=None):
        self.x = x
        self.q = q
        super().__init__(message or f"coordinate collision at x={x:.6g}: q={q}")


class StepSizeError(BandflowError):
    """Adaptive integration underflowed its step size."""


class PeriodDetectionError(BandflowError):
    """A trace was expected to be periodic but no period could be detected."""


class NormalizationError(BandflowError):
    """A polynomial could not be brought to the required normal form."""
