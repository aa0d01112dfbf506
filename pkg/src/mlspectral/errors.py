"""Exception types raised across the package."""


class MLSpectralError(Exception):
    """Base class for all package errors."""


class InvalidParameter(MLSpectralError, ValueError):
    pass


class NonConvergence(MLSpectralError, ArithmeticError):
    pass


class ResolutionTooLow(MLSpectralError, ValueError):
    pass


class TruncationInsufficient(MLSpectralError, ValueError):
    pass


class WindowTooShort(MLSpectralError, ValueError):
    pass


class InvalidCase(MLSpectralError, ValueError):
    pass


class ConfigError(MLSpectralError, ValueError):
    """Experiment config could not be parsed or violates a precondition.

    ``line`` is the 1-based line of the offending entry when it is known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
