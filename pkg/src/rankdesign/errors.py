"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: validation problems exit with 1,
numerical failures with 2 and I/O failures (``OSError``) with 3.
"""


class ValidationError(ValueError):
    """Invalid argument, configuration or input data."""


class CapacityError(ValidationError):
    """A subset collection is too large for the supported index width."""


class ParseError(ValidationError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class SingularDesignError(NumericalError):
    """The information matrix of a design is (numerically) singular."""
