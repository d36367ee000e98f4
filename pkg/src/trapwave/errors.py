"""Exception hierarchy. Each class carries the CLI exit code of its error class."""


class TrapError(Exception):
    exit_code = 1


class ConfigError(TrapError, ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    exit_code = 2

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ArgumentError(ConfigError):
    exit_code = 2


class RangeError(ArgumentError):
    exit_code = 2


class NumericalError(TrapError, ArithmeticError):
    exit_code = 3


class DegeneracyError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class BoundaryError(NumericalError):
    pass


class NonConfiningError(NumericalError):
    pass


class EscapeError(NumericalError):
    pass


class InfeasibleError(TrapError):
    """No voltage set within the limits was found.

    ``best`` holds whatever diagnostic the raiser had (smallest max |V|, residual).
    """

    exit_code = 4

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best or {}


class TrapIOError(TrapError, OSError):
    exit_code = 5
