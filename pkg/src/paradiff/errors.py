"""Exception types shared across the library."""


class ConfigurationError(ValueError):
    """Invalid discretization or solver configuration (bad sizes, unknown kinds)."""


class SolverError(RuntimeError):
    """Numerical failure inside a solver (zero pivot, NaN, singular system)."""
