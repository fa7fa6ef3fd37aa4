"""Exception hierarchy shared by the library and the command line front end."""


class QThermoError(Exception):
    """Base class for all errors raised by qthermo."""

    exit_code = 2


class ValidationError(QThermoError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 1


class ConfigError(ValidationError):
    """A scenario file could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(QThermoError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    exit_code = 2


class WitnessInapplicable(QThermoError):
    """A non-Markovianity witness was requested for an incompatible channel."""

    exit_code = 3


class OutputError(QThermoError):
    """An output file could not be read or written."""

    exit_code = 1
