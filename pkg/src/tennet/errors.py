"""Exception hierarchy shared by every tennet module."""


class TennetError(Exception):
    """Base class for all library errors."""


class ShapeError(TennetError, ValueError):
    """Array or vector dimensions do not agree."""


class ValidationError(TennetError, ValueError):
    """A value violates a documented precondition or invariant."""


class DegenerateRangeError(ValidationError):
    """A data column has zero range and cannot be normalized."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column!r} has zero range")


class DegenerateWeightError(ValidationError):
    """The quadrature of a weight function is (numerically) zero."""


class ParseError(ValidationError):
    """A CSV cell could not be read. ``row`` is 1-based and counts the header."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class SchemaError(ValidationError):
    """A file has the wrong layout, e.g. an unexpected number of columns."""


class UnsupportedOperationError(TennetError):
    """The operation is not defined for this kind of model."""


class DivergenceError(TennetError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
