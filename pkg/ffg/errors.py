"""
Exception and warning types raised by the ffg library.
"""

from typing import Optional


class FfgError(Exception):
    """Base class for every error raised by ffg."""


class ConfigError(FfgError):
    """Invalid configuration value or experiment description.

    Args:
        message: Human readable description of the problem
        field: Dotted name of the offending field, when known
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(FfgError, ValueError):
    """Argument outside the domain of a special function or a physical model."""


class ConvergenceError(FfgError, ArithmeticError):
    """A series, quadrature or integrator did not reach its tolerance.

    Args:
        message: Description of the failure
        module: Name of the ffg module where the failure originated
    """

    def __init__(self, message: str, module: str):
        self.module = module
        super().__init__(f"[{module}] {message}")


class AliasingError(FfgError):
    """The tau grid is too coarse for the requested harmonic range."""


class DimensionError(FfgError):
    """The composite Floquet space exceeds the configured size limit."""


class TruncationWarning(UserWarning):
    """A Fock-space vector carries weight in the top truncation level."""
