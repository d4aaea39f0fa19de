from typing import Optional


class FilamentLabError(Exception):
    """Base class for every error raised by the laboratory"""

    kind = "numerical"


class ValidationError(FilamentLabError, ValueError):
    """Invalid input, configuration or file"""

    kind = "validation"


class ResolutionError(FilamentLabError, ValueError):
    """Grid too coarse for a requested stencil"""

    kind = "validation"

    def __init__(self, message: str = "insufficient resolution for stencil"):
        super().__init__(message)


class UnsupportedOrderError(ValidationError):
    """Compatibility order above the configured cap"""


class NumericalError(FilamentLabError):
    """A solve or an iteration failed; carries the failing residual"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class TransformUndefinedError(NumericalError):
    """Hasimoto transform undefined (curvature below floor everywhere)"""
