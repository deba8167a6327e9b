"""
Exception hierarchy for the IDS game solvers.

Input errors (bad census, bad parameters, bad files) map to CLI exit code 1,
solver errors to exit code 2.
"""

from typing import Optional


class IdsGameError(Exception):
    """Base class for every error raised by the engine."""


class InputError(IdsGameError, ValueError):
    """Caller supplied something the solvers cannot work with."""


class SolverError(IdsGameError):
    """A solver could not produce a certified answer."""


class DegenerateCensus(InputError):
    """Population vector has no positive mass."""


class InvalidParameter(InputError):
    """Parameter outside its admissible range."""


class DimensionMismatch(InputError):
    """Profile / census lengths disagree."""


class ConfigError(InputError):
    """Configuration file missing, malformed or inconsistent."""


class OutputError(InputError):
    """Result file could not be written."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot write {path}: {reason}")
        self.path = path


class SolverDiverged(SolverError):
    """Iterative method failed to converge or lost its bracket."""


class VarthetaNotMonotone(SolverError):
    """
    The modified exposure map is not strictly increasing, so the modified
    game's NE is not certified as the global social optimum.
    Fall back to brute_force_minimizer.
    """


class BudgetExceeded(SolverError):
    """Brute-force grid larger than the allowed number of evaluations."""


class InvariantViolation(SolverError):
    """A result failed a consistency check at emission time."""


class SweepError(SolverError):
    """A sweep point failed; carries the offending alpha."""

    def __init__(self, alpha: float, cause: Optional[Exception] = None):
        message = f"sweep failed at alpha={alpha!r}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
        self.alpha = alpha
