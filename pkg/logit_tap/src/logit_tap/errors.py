class LogitTapError(Exception):
    """Base class for everything this package raises on purpose."""


class ModelLoadError(LogitTapError):
    """The model reference could not be resolved into a working backend."""


class TokenizationError(LogitTapError):
    """The backend could not turn a context string into model input."""


class WireError(LogitTapError):
    """A dump or vocabulary file violates the wire format.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.message = message
        self.line = line
