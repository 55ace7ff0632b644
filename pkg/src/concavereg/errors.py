"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class FitError(ValueError):
    """A regression or rate fit cannot be computed from the given points."""


class NoCrossingError(ValueError):
    """A fixed-point search found no sign change in its search range."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResourceError(RuntimeError):
    """A construction would exceed its memory or time budget."""


class SolverError(RuntimeError):
    """A numerical solver failed to reach its tolerance.

    Carries the best iterate found and its KKT residual so callers can
    inspect or log the failure.
    """

    def __init__(self, message, best=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
