"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class MetafewError(Exception):
    """Base class for all package errors."""


class ConfigError(MetafewError):
    """Invalid configuration or an infeasible request."""


class DataError(MetafewError):
    """Malformed data, files, or violated data contracts."""


class ShapeError(DataError):
    """Array dimensions incompatible with the operation."""


class ContractError(DataError):
    """Input violates an operation precondition (e.g. non-one-hot labels)."""


class NumericError(MetafewError):
    """Non-finite values or diverging iterations."""


class InfeasibleError(ConfigError):
    """Requested structure cannot be built from the given data."""


class TaskRejected(MetafewError):
    """Control-flow signal: the sampled task had too few members; resample."""
