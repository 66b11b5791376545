"""Exception hierarchy shared by the library and the CLI."""


class BatsfitError(Exception):
    """Base class; the CLI maps these to a JSON error document."""

    code = "error"


class DomainError(BatsfitError, ValueError):
    code = "domain_error"


class ConfigError(BatsfitError, ValueError):
    code = "config_error"


class InsufficientDataError(BatsfitError, ValueError):
    code = "insufficient_data"


class NumericalError(BatsfitError, RuntimeError):
    code = "numerical_error"


class IntegrityError(BatsfitError, RuntimeError):
    code = "integrity_error"


class ParseError(BatsfitError, ValueError):
    code = "parse_error"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
