"""Exception types shared across the package."""


class NotPositiveDefiniteError(ValueError):
    """A matrix expected to be symmetric positive definite is not.

    Attributes
    ----------
    pivot : int or None
        Zero-based index of the first non-positive pivot encountered
        during factorization, when known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DegenerateCorrelationError(ValueError):
    """A pair correlation left the admissible range of a pairwise density.

    Attributes
    ----------
    pair : tuple of int
        Indices (i, j) of the first offending pair.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class SingularInformationError(ValueError):
    """An information matrix required to be invertible is singular."""


class ConfigError(ValueError):
    """A run configuration is missing, malformed, or contains unknown keys."""
