"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numeric failures exit 3.
"""


class ChirpmapError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ChirpmapError):
    """Bad command line or config usage."""


class DataError(ChirpmapError):
    """Input data violates a contract (schema, emptiness, invalid values)."""


class NumericError(ChirpmapError):
    """A numeric computation failed (divergence, degenerate geometry)."""
