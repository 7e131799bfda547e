"""Exception hierarchy shared by all dackrr modules."""


class DackrrError(Exception):
    """Base class for every error raised by the package."""


class InputError(DackrrError, ValueError):
    """Array shapes or dimensions do not match what an operation expects."""


class ParameterError(DackrrError, ValueError):
    """A scalar parameter is outside its admissible range."""


class NumericError(DackrrError, ArithmeticError):
    """A linear-algebra routine failed (Cholesky, eigen-solver)."""


class ParseError(DackrrError, ValueError):
    """A data or config file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
