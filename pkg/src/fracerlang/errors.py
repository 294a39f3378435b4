"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a function is defined."""


class SeriesConvergenceError(ArithmeticError):
    """An infinite series could not be summed to the requested tolerance.

    ``index`` names the summation index that failed (``"k"``, ``"delta"``...)
    and ``terms`` the number of terms used before giving up.
    """

    def __init__(self, message, index=None, terms=None):
        super().__init__(message)
        self.index = index
        self.terms = terms


class RangeError(OverflowError):
    """A result is not representable in double precision."""


class QuadratureError(ArithmeticError):
    """A numerical integral did not reach its tolerance."""


class InversionRefused(ArithmeticError):
    """Numerical Laplace inversion is unreliable for this transform and time."""
