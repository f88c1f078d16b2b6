"""Exception classes shared across the package."""


class LargeVarError(Exception):
    """Base class for all package errors."""


class DataError(LargeVarError, ValueError):
    """Input data cannot be used (bad values, shapes, missing variables)."""


class ConfigError(LargeVarError, ValueError):
    """A run configuration is malformed or inconsistent."""


class SolverError(LargeVarError, RuntimeError):
    """Estimation failed in a way that cannot be reported as a flag."""
