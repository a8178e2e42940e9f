"""Exception types shared across the package."""


class MsdftvError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(MsdftvError, ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class ConfigError(MsdftvError, ValueError):
    """Invalid hyperparameter or configuration value."""


class ContractError(MsdftvError, RuntimeError):
    """A documented pre/postcondition was violated."""


class NumericError(MsdftvError, ValueError):
    """Non-finite values appeared where finite numbers are required."""


class DataFormatError(MsdftvError, ValueError):
    """Malformed input file (CSV cell, ragged row, bad checkpoint)."""


class InsufficientDataError(MsdftvError, ValueError):
    """Input series or split too short for the requested operation."""
