"""
Exception hierarchy of the simulator.
Every error carries a message plus a details dict that the CLI logs verbatim.
"""
from typing import Any, Dict, Optional


class StabilizationError(Exception):
    """Base exception for all simulator errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """
        Initialize exception.

        Args:
            message: Error message
            details: Additional error details
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def describe(self) -> str:
        """One-line "Type: message [k=v, ...]" form for logs."""
        text = f"{type(self).__name__}: {self.message}"
        if self.details:
            text += " [" + ", ".join(f"{k}={v}" for k, v in self.details.items()) + "]"
        return text


class DimensionError(StabilizationError):
    """Raised when operator/state shapes or qubit targets do not fit together."""
    pass


class ValidationError(StabilizationError):
    """Raised when an input violates a documented precondition."""
    pass


class NumericalError(StabilizationError):
    """Raised when norm or unitarity drifts beyond tolerance, or an integrator fails."""
    pass


class ConfigurationError(StabilizationError):
    """Raised when configuration is invalid."""
    pass


class ExportError(StabilizationError):
    """Raised when CSV or metadata export fails."""
    pass


class DataNotFoundError(StabilizationError):
    """Raised when required data is not found."""
    pass
