"""Exception hierarchy shared by every module."""


class JNError(Exception):
    """Base class for all errors raised by jnseq."""


class MeasureError(JNError, ValueError):
    """Malformed measure input: mixed spaces, points outside the carrier, zero atoms."""


class PreconditionError(JNError, ValueError):
    """An operation was called on input violating its documented precondition."""


class HorizonError(JNError):
    """The finite horizon was exhausted before a required selection could be made."""


class InvariantViolation(JNError):
    """An exactly checkable invariant failed. Always a bug or a corrupted input."""


class ParseError(JNError, ValueError):
    """A file or textual descriptor could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
