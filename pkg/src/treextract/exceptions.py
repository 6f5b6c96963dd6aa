"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` subclasses to exit code 2 and every
other :class:`TreeXtractError` to exit code 1.
"""


class TreeXtractError(Exception):
    """Base class for all package errors."""


class ValidationError(TreeXtractError, ValueError):
    """Bad user input: arguments, files, or samples that violate a schema."""


class SchemaError(ValidationError):
    pass


class DataFormatError(ValidationError):
    """A CSV cell could not be parsed. Carries the 1-based row and the column name."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.row = row
        self.column = column


class BoundsError(ValidationError):
    pass


class CapacityError(ValidationError):
    pass


class ModelFormatError(ValidationError):
    """Malformed model document; ``path`` locates the offending node."""

    def __init__(self, message, path="root"):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericError(TreeXtractError, ArithmeticError):
    pass


class ServiceError(TreeXtractError):
    """Service startup failure (e.g. port already in use)."""


class TransportError(TreeXtractError):
    """The remote oracle could not be reached."""


class ProtocolError(TreeXtractError):
    """The remote oracle answered with a non-2xx status."""

    def __init__(self, status, body):
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body
