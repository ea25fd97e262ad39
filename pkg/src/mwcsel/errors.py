"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``InvariantViolation`` -> 4.
"""


class MwcselError(Exception):
    """Base class for all package errors."""


class ConfigError(MwcselError, ValueError):
    """A parameter is outside its declared bounds."""


class DataError(MwcselError, ValueError):
    """Input data is missing, malformed, or fails validation."""


class ParseError(DataError):
    """A record could not be parsed; carries the 1-based row and column."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} (at {', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyInputError(DataError):
    pass


class StratificationError(DataError):
    pass


class EmptyClassError(DataError):
    pass


class InvariantViolation(MwcselError, AssertionError):
    """An internal guarantee (e.g. strict weight increase on admission) failed."""
