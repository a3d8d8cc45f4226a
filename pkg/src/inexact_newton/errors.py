"""Exception types shared across the package."""


class UsageError(ValueError):
    """Raised when a caller violates an input contract."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces a non-finite or unusable value."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class DegenerateModel(NumericalError):
    """The sub-problem model predicts no (or negligible) decrease."""


class ParseError(ValueError):
    """Malformed dataset input. ``line`` is the 1-based input line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
