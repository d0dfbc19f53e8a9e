"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad run configuration (missing file, unknown key, constraint violation)."""


class SolverError(RuntimeError):
    """A linear solve failed to converge or broke down."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvariantError(RuntimeError):
    """A conservation or stability invariant was breached during a run."""
