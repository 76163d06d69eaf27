"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: validation problems exit
with 2, numeric failures with 3, and I/O trouble with 4.
"""


class SeedrankError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(SeedrankError, ValueError):
    """Invalid model parameters or operation arguments.

    The message names the violated invariant.
    """


class SizeGuardError(ParameterError):
    """An exhaustive oracle was asked to run beyond its size guard."""


class DegenerateMomentsError(SeedrankError, RuntimeError):
    """Class moments too ill-conditioned to build a discriminant."""


class DegenerateParameterError(SeedrankError, RuntimeError):
    """Model parameters lead to a degenerate theory solution."""


class NearSingularEstimatorError(SeedrankError, RuntimeError):
    """Moment estimator denominator is numerically zero.

    Carries the raw denominator so callers can see how close to the
    degenerate direction the observed graph is.
    """

    def __init__(self, message: str, denominator: float):
        super().__init__(message)
        self.denominator = denominator


class NumericFailureError(SeedrankError, RuntimeError):
    """A numerical iteration produced non-finite values."""

    def __init__(self, message: str, sweep: int | None = None):
        super().__init__(message)
        self.sweep = sweep
