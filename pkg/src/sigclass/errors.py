"""Exception types shared across the pipeline stages."""


class SigclassError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SigclassError):
    """An argument or data value violates a documented precondition."""


class ConfigurationError(SigclassError):
    """A config file, channel roster, or setup reference is inconsistent."""


class ParseError(SigclassError):
    """A data file could not be parsed; the message names the offending line."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(SigclassError):
    """A computation produced or received non-finite values."""


class SelectionError(SigclassError):
    """Frequency selection produced an empty feature mask."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
