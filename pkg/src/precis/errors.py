"""Exception and warning types shared across the package."""


class PrecisError(Exception):
    """Base class for errors raised by this package."""


class NotPositiveDefinite(PrecisError, ValueError):
    """A matrix (or a Schur complement scalar) that must be PD is not."""


class DimensionTooSmall(PrecisError, ValueError):
    pass


class DegenerateMatrix(PrecisError, ValueError):
    """Raised when S has no nonzero off-diagonal entry, so lambda_max == 0."""


class MatrixFormatError(PrecisError, ValueError):
    """Malformed matrix text file.

    The message always names the file and the offending line number.
    """

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class WarmStartInfeasible(UserWarning):
    """Warm start for GLASSO violates ||W0 - S||_inf <= lambda.

    Row/column updates are then no longer guaranteed to keep W positive
    definite.
    """
