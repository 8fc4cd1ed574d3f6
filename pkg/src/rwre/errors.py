"""Exception and warning types shared across the package."""


class RWREError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpec(RWREError):
    """Environment law or site law failed validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class InvalidLaw(InvalidSpec):
    pass


class UndefinedDelta(RWREError):
    """The (1,1) entry of a matrix product is exactly zero."""


class TooLarge(RWREError):
    """Exhaustive enumeration would exceed its size bound."""


class WindowTooLarge(RWREError):
    pass


class GridTooNarrow(RWREError):
    """Legendre supremum attained at the edge of the u-grid."""


class NoSlowdownRoot(RWREError):
    """The regime has no root of F in (0, 1) or (-1, 0)."""


class RegimeMismatch(RWREError):
    pass


class Unresolved(RWREError):
    """Monte Carlo sign test did not resolve within the replica budget."""


class NumericalFault(RWREError):
    pass


class HeavyTailWarning(RuntimeWarning):
    """One replica carries almost all of the log-sum-exp mass."""


class AllZeroWarning(RuntimeWarning):
    """A trap scan found no trapping environment at any horizon."""
