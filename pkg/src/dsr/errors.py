"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
"""


class DsrError(Exception):
    """Base class for all package-specific errors."""


class DataError(DsrError, ValueError):
    """Malformed or inconsistent input data (shapes, file contents, masks)."""


class NumericError(DsrError, RuntimeError):
    """Numerical failure inside a solver or decomposition."""
