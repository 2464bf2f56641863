"""Exception hierarchy.

Input problems derive from :class:`InvalidInputError`; numerical
degeneracies (zero variances, undefined ratios, too many excluded
replicates) derive from :class:`DegenerateError`. The CLI maps the two
families to distinct exit codes.
"""


class ResampleError(Exception):
    """Base class for all errors raised by resamplekit."""


class InvalidInputError(ResampleError, ValueError):
    """Malformed data, out-of-range arguments, or unknown names."""


class BudgetExceededError(InvalidInputError):
    """Exhaustive enumeration requested beyond the configured budget."""


class InfeasibleTiltError(InvalidInputError):
    """Tilting target lies outside the open range of the data."""


class VRUnsupportedError(InvalidInputError):
    """Variance reduction requested for a method lacking the equivariance it needs."""


class DegenerateError(ResampleError, ArithmeticError):
    """A numerical quantity needed by the computation is degenerate."""


class DegenerateSampleError(DegenerateError):
    """Zero variance (or similar) where a positive spread is required."""


class RatioUndefinedError(DegenerateError):
    """A ratio statistic has a zero denominator."""


class DegenerateTableError(DegenerateError):
    """Contingency table with a zero margin."""


class DistributionDegenerateError(DegenerateError):
    """Too many replicates were undefined and had to be excluded."""


class InsufficientReplicatesError(DegenerateError):
    """Fewer replicates than a summary needs."""


class SingularDesignError(DegenerateError):
    """Regression design matrix lacks full column rank."""
