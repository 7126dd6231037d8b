"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or schema."""


class SingularGeometryError(ValidationError):
    """A geometric configuration has no valid pairwise representation
    (arrival angle at 0 or pi, zero vertical offset, coincident points)."""


class DegenerateGeometryError(ValidationError):
    """Positions cannot be recovered from pairwise data (rank-deficient system)."""


class SingularCovarianceError(ValidationError):
    """The array covariance is not invertible."""
