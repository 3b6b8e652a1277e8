"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: usage problems exit 1, data/schema
problems exit 2, numerical failures exit 3.
"""


class WindcalError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class InvalidArgumentError(WindcalError, ValueError):
    exit_code = 1


class DataError(WindcalError):
    """Input data violates the schema or integrity rules."""

    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DataError):
    pass


class IntegrityError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class NumericalFailureError(WindcalError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            detail = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)
