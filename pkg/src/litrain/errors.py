"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError (and its
subclasses) -> 2. Everything else is a bug.
"""


class UsageError(ValueError):
    """Caller violated a documented precondition (bad argument, bad config)."""


class DataError(ValueError):
    """Input data is missing, inconsistent, or degenerate."""


class ParseError(DataError):
    """A file or model response could not be parsed."""


class NumericError(ValueError):
    """A computation produced or received a non-finite value."""
