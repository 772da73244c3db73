"""Exception types shared across the package."""


class SparseCcaError(Exception):
    """Base class for all package-specific errors."""


class SolverFailureError(SparseCcaError):
    """An iterative routine failed to produce a usable result."""


class DivergenceError(SolverFailureError):
    """An iterative solver produced non-finite values."""


class NotPsdError(SparseCcaError):
    """A matrix required to be positive semidefinite is not."""


class DegenerateInputError(SparseCcaError):
    """Input is rank-deficient, zero, or otherwise unusable."""


class DegenerateRankError(DegenerateInputError):
    """A decomposition has strictly fewer meaningful directions than requested."""


class BudgetExceededError(SparseCcaError):
    """A combinatorial enumeration would exceed its allowed size."""


class CvFailureError(SparseCcaError):
    """Cross-validation could not score any candidate penalty."""


class SamplerFailureError(SparseCcaError):
    """A random sampler failed its acceptance-rate guard."""


class PreconditionError(SparseCcaError, ValueError):
    """An argument violates a documented precondition."""


class NumericError(SparseCcaError):
    """A numerical evaluation produced non-finite intermediate values."""
