"""Exception types shared across the package.

Two families matter to callers: bad inputs (InvalidArgumentError and
subclasses) and numerical breakdowns (NumericalFailureError and subclasses).
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""


class HypokitError(Exception):
    """Base class for every error raised by hypokit."""


class InvalidArgumentError(HypokitError, ValueError):
    """A caller-supplied value violates an operation's preconditions."""


class UnsupportedDomainError(InvalidArgumentError):
    """The requested computation is not defined on this domain."""


class InsufficientDataError(InvalidArgumentError):
    """Too few samples for the requested estimator."""


class DefectiveCaseError(InvalidArgumentError):
    """The closed-form construction is singular at this parameter value."""


class DegenerateWitnessError(InvalidArgumentError):
    """Witness functions vanish identically (constant potential)."""


class NumericalFailureError(HypokitError):
    """A linear-algebra step failed or an iteration did not converge."""


class IllConditionedBasisError(NumericalFailureError):
    """The Gram matrix is not numerically positive definite."""
