"""Exception hierarchy shared by every solver and the CLI."""


class FBFError(Exception):
    """Base class for all package errors."""


class ParameterError(FBFError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DimensionError(FBFError, ValueError):
    """Operand shapes do not agree."""


class ScheduleIndexError(FBFError, IndexError):
    """Schedules are 1-based; index 0 has no finite value."""


class InfeasibleError(FBFError, ValueError):
    """A linear constraint system has no solution."""


class UsageError(FBFError, RuntimeError):
    """A diagnostic was called without the data it needs."""


class NoUniqueSolutionError(FBFError, ValueError):
    """An oracle system is singular or has several solutions."""


class NumericalDivergence(FBFError, ArithmeticError):
    """Iterates blew up (non-finite or above the divergence guard).

    ``iteration`` is the index of the offending step and ``record`` the
    partial trace collected up to that point (may be ``None``).
    """

    def __init__(self, iteration, message="", record=None):
        self.iteration = iteration
        self.record = record
        super().__init__(f"numerical divergence at iteration {iteration}: {message}".rstrip(": "))
