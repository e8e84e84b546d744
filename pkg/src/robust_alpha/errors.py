"""Exception hierarchy shared by the estimators, tests and CLI."""


class AlphaTestError(Exception):
    """Base class for every error raised by this package."""


class DataError(AlphaTestError, ValueError):
    """Malformed input: bad shapes, non-finite cells, misaligned dates."""


class NumericalError(AlphaTestError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""


class RankDeficientError(NumericalError):
    pass


class DegenerateError(NumericalError):
    """A quantity that must be strictly positive came out zero (or close)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(NumericalError):
    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations
