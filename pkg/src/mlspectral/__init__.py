"""Mittag-Leffler propagators for fractional evolution equations on T^n and SU(2)."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    InvalidCase,
    InvalidParameter,
    MLSpectralError,
    NonConvergence,
    ResolutionTooLow,
    TruncationInsufficient,
    WindowTooShort,
)
