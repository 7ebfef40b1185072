"""Exception hierarchy shared by the library and the command line front end."""


class FdMimoError(Exception):
    """Base class for every error raised by :mod:`fdmimo`."""


class ConfigError(FdMimoError, ValueError):
    """Invalid configuration. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigFileMissing(ConfigError):
    pass


class ConfigParseError(ConfigError):
    pass


class ConfigInvariantError(ConfigError):
    pass


class DimensionError(FdMimoError, ValueError):
    """Matrix shapes are inconsistent or the antenna geometry is infeasible."""


class SingularChannelError(FdMimoError, ArithmeticError):
    """A Gram matrix is (numerically) singular, so ZF cannot be formed."""


class InputFileError(FdMimoError, ValueError):
    """Malformed ray or pattern file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
