"""Exception types shared across the package."""


class CtxGapError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(CtxGapError, ValueError):
    pass


class NumericalDegeneracyError(CtxGapError, ArithmeticError):
    """Raised when a rank-one extension would produce a singular system."""


class EndOfDataError(CtxGapError, LookupError):
    pass


class UnsupportedError(CtxGapError):
    """The requested quantity is not available for this environment."""


class DataParseError(CtxGapError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DataParseError):
    pass


class ConfigError(CtxGapError, ValueError):
    pass
