"""Exception hierarchy shared across the package.

Each error class carries the process exit code the command line tool maps
it to (0 ok, 2 bad config, 3 hypothesis violation, 4 solver failure,
5 output I/O).
"""


class PorohystError(Exception):
    exit_code = 1


class ConfigError(PorohystError):
    """Malformed or inconsistent scenario configuration."""

    exit_code = 2


class HypothesisError(PorohystError):
    """Initial memory incompatible with the initial pressure field."""

    exit_code = 3

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = violations or []


class SolverFailure(PorohystError):
    """Newton and relaxation both exhausted without meeting tolerance."""

    exit_code = 4

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class SpdSolveError(SolverFailure):
    """Inner linear solve did not converge; carries the final residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class OutputError(PorohystError):
    exit_code = 5


class InvalidThresholdError(ValueError):
    """Play threshold must be strictly positive."""


class DomainError(ValueError):
    """Argument outside the admissible range (for example |xi| > Lambda)."""


class GridMismatchError(ValueError):
    """Operation mixing curves or fields from different grids."""
