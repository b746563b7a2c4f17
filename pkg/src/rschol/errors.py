"""Exception types shared across the solver."""


class RscholError(Exception):
    """Base class for all rschol errors."""


class ParseError(RscholError):
    """Malformed Matrix Market or coordinate file."""


class NotSymmetric(RscholError):
    """Input file does not declare a symmetric matrix."""


class MissingDiagonal(RscholError):
    """One or more diagonal entries are absent."""


class NonPositiveDiagonal(RscholError):
    """A diagonal entry is zero or negative."""


class DimensionMismatch(RscholError):
    """Operand dimensions are incompatible."""


class ShapeMismatch(RscholError):
    """Dense operand has the wrong shape."""


class NotSubset(RscholError):
    """Scatter/gather index list is not a subset of its target."""


class MissingCoordinates(RscholError):
    """No spatial coordinates available for the requested indices."""


class SingularDiagonal(RscholError):
    """Triangular solve encountered a zero diagonal entry."""


class IndefiniteError(RscholError):
    """Cholesky hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing pivot within the
    block that was being factored.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix not positive definite (pivot {pivot})")


class TooManyRestarts(RscholError):
    """Factorization kept hitting indefinite blocks after all retries."""


class BreakdownNonSPD(RscholError):
    """CG produced a non-positive curvature; matrix or preconditioner is not SPD."""


class NoConvergenceWarning(UserWarning):
    """Iterative eigensolver stopped before reaching the requested tolerance."""
