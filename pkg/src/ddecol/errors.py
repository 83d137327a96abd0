"""Exception types shared across the package."""


class DdecolError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DdecolError, ValueError):
    """Evaluation point outside the rescaled period domain [0, 1]."""


class DelayExceedsPeriodError(DdecolError, ValueError):
    """The delay does not fit inside one period (tau/omega > 1), so the
    periodic wrap of the state history is undefined."""


class NonFiniteResidualError(DdecolError):
    """A residual entry came out NaN or infinite."""

    def __init__(self, row: int, label: str = ""):
        self.row = row
        self.label = label
        msg = f"non-finite residual in row {row}"
        if label:
            msg += f" ({label})"
        super().__init__(msg)


class SingularJacobianError(DdecolError):
    """The Newton matrix is (numerically) singular."""


class NewtonNoConvergenceError(DdecolError):
    """Newton's method did not meet the residual or step tolerance.

    Carries the best iterate seen (`best_z`) and the run diagnostics.
    """

    def __init__(self, message, best_z=None, diagnostics=None):
        super().__init__(message)
        self.best_z = best_z
        self.diagnostics = diagnostics


class NoPeriodicSolutionError(DdecolError, ValueError):
    """Requested a closed-form periodic solution where none exists."""


class InsufficientDataError(DdecolError, ValueError):
    """Not enough usable data points for a requested fit."""


class ConfigError(DdecolError, ValueError):
    """Invalid or unknown configuration input."""
