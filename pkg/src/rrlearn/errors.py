"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or incompatible input data (CSV schema, labels, shapes)."""


class SolverError(RuntimeError):
    """A training or minimization routine failed to converge."""


class ConfigError(ValueError):
    """Invalid run configuration (config file or CLI flags)."""
