"""Exception hierarchy shared across the package.

Numerical failures raised while evaluating a candidate parameter draw
(indeterminacy, singular moments, failed factorizations) derive from
``NumericalError`` so samplers can treat them uniformly as zero-likelihood
proposals instead of aborting a chain.
"""


class TctvpError(Exception):
    """Base class for all package errors."""


class NumericalError(TctvpError):
    """A numerical failure attributable to the parameter point being evaluated."""


class Indeterminacy(NumericalError):
    """The rational-expectations system admits multiple stable solutions."""


class NoStableSolution(NumericalError):
    """The rational-expectations system has no stable solution."""


class SingularRecursion(NumericalError):
    """The anticipated-path backward recursion hit a singular coefficient matrix."""


class NonStationary(NumericalError):
    """Spectral radius of the transition matrix is not strictly below one."""


class SingularGamma(NumericalError):
    """A second-moment matrix failed its positive-definiteness check."""


class DegeneratePrior(NumericalError):
    """Prior precision is singular and nothing restores properness."""


class CholeskyFailure(NumericalError):
    """A matrix expected to be positive definite failed its factorization."""


class DofTooSmall(TctvpError):
    """Degrees of freedom insufficient for the requested moment."""


class InsufficientData(TctvpError):
    """Not enough observations for the requested construction."""


class EmptyRun(TctvpError):
    """A forecast run contains no scored origins."""


class NonCompanionable(TctvpError):
    """Coefficient layout is not 1 + N*p, so no companion form exists."""


class ParseError(TctvpError):
    """Malformed input data; carries row/column location when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = ""
        if row is not None:
            loc += f" (row {row}"
            loc += f", column {column!r})" if column is not None else ")"
        elif column is not None:
            loc += f" (column {column!r})"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class GapError(TctvpError):
    """Dates are not strictly increasing and contiguous."""


class ConfigError(TctvpError):
    """Run configuration failed schema validation."""
