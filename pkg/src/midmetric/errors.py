"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
Anything else escaping a command is a bug.
"""


class MidmetricError(Exception):
    """Base class for errors raised by this package."""


class DataError(MidmetricError):
    """Malformed, inconsistent, or out-of-contract input data."""


class NumericError(MidmetricError):
    """Numerically invalid operation (singular matrix, non-PSD input, ...)."""


class UsageError(MidmetricError):
    """Bad command-line invocation."""
