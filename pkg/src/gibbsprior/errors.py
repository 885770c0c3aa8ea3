"""Exception types shared across the package."""


class GibbsPriorError(Exception):
    """Base class for errors raised by gibbsprior."""


class DomainError(GibbsPriorError, ValueError):
    """Arguments fall outside the support or admissible parameter set."""


class DataError(GibbsPriorError, ValueError):
    """Input data could not be parsed or violates a sample constraint."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(GibbsPriorError, ArithmeticError):
    """A numerical procedure failed to reach its target accuracy."""


class TruncationError(NumericalError):
    """An infinite mixture sum could not be truncated to the requested tolerance."""


class NoSolutionError(NumericalError):
    """A root-finding problem has no solution in the admissible range."""


class ConvergenceError(NumericalError):
    """An optimizer exhausted its iteration budget."""
