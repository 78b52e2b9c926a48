"""Exception types shared across the package."""


class PlapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PlapError):
    """Invalid experiment or solver configuration."""


class DataError(PlapError):
    """Malformed input data (files, datasets, matrices)."""


class IdxError(DataError):
    """Broken IDX file.  ``code`` is one of 'bad-magic', 'truncated', 'dim-overflow'."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class UnboundedGrowthError(PlapError):
    """The integrand has no finite quadratic growth bounds (needs a relaxation interval)."""


class DegenerateWeightError(PlapError):
    """A least-squares weight degenerated to zero or infinity."""


class SingularSystemError(PlapError):
    """The (weighted) normal equations look singular; the operator kernel must not
    intersect the constraint kernel."""


class CgConvergenceError(PlapError):
    """Inner CG solver stopped before reaching its residual target."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SolverError(PlapError):
    """Outer solver failed (wraps inner failures with iteration context)."""
