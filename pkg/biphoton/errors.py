"""
Exception and warning types raised by the toolkit
"""

from typing import Any, Optional


class BiphotonError(Exception):
    """Base class for every error the toolkit raises on purpose"""


class ValidationError(BiphotonError, ValueError):
    """Input outside the admissible domain of an operation"""


class WavelengthRangeError(ValidationError):
    def __init__(self, wavelength: float, lo: float, hi: float):
        super().__init__(
            f"Wavelength {wavelength * 1e9:.4f} nm outside the operating range "
            f"[{lo * 1e9:.0f} nm, {hi * 1e9:.0f} nm]"
        )
        self.wavelength = wavelength


class DomainError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class StabilityError(ValidationError):
    def __init__(self, step: float, limit: float):
        super().__init__(
            f"Integration step {step:g} s exceeds the stability limit {limit:g} s; use a smaller step"
        )
        self.step = step
        self.limit = limit


class NumericError(BiphotonError, ArithmeticError):
    """A well-posed computation that has no answer or did not converge"""


class NoSolutionError(NumericError):
    pass


class DerivativeUndefinedError(NoSolutionError):
    """Finite difference straddles the edge of the tuning curve"""


class ConvergenceError(NumericError):
    pass


class RankDeficiencyError(NumericError):
    def __init__(self, message: str, fallback: Optional[Any] = None):
        super().__init__(message)
        self.fallback = fallback


class WeakFieldWarning(UserWarning):
    """Mean occupation too large for the weak-field rate formulas"""
