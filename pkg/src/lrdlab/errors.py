"""Exception types shared across the package."""


class LrdLabError(Exception):
    """Base class for all package errors."""


class ParameterError(LrdLabError, ValueError):
    """An argument is outside the domain of the operation."""


class DataError(LrdLabError, ValueError):
    """Input data cannot be processed (non-finite values, non-positive errors, ...)."""


class HorizonError(LrdLabError):
    """A counting-process level lies beyond the simulated horizon.

    Raised by ``counting`` when ``t >= S(n)``; callers are expected to
    regenerate with a longer series.
    """

    def __init__(self, level, total):
        self.level = level
        self.total = total
        super().__init__(
            f"level {level!r} is not below S(n) = {total!r}; enlarge the series"
        )


class NumericalError(LrdLabError, ArithmeticError):
    """A numerical procedure failed to converge."""


class ExperimentError(LrdLabError):
    """An experiment could not be completed (e.g. horizon extension exhausted)."""
