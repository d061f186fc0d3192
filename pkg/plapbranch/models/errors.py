"""Error models and custom exceptions."""

from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel


class ErrorCode(str, Enum):
    """Standard error codes."""

    VALIDATION_ERROR = "VALIDATION_ERROR"
    INVALID_DOMAIN = "INVALID_DOMAIN"
    MESH_RESOLUTION = "MESH_RESOLUTION"
    DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
    INVALID_EXPONENT = "INVALID_EXPONENT"
    ZERO_DENOMINATOR = "ZERO_DENOMINATOR"
    UNCONVERGED = "UNCONVERGED"
    NO_SIGN_CHANGE = "NO_SIGN_CHANGE"
    QUADRATURE_BUDGET = "QUADRATURE_BUDGET"
    UNSUPPORTED = "UNSUPPORTED"
    CONFIGURATION_ERROR = "CONFIGURATION_ERROR"


class ErrorResponse(BaseModel):
    """Standard error response model."""

    error_code: ErrorCode
    message: str
    details: Optional[Dict[str, Any]] = None


class PLapError(Exception):
    """Base exception for plapbranch."""

    def __init__(
        self,
        message: str,
        error_code: ErrorCode,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}

    def to_response(self) -> ErrorResponse:
        """Convert to error response model."""
        return ErrorResponse(
            error_code=self.error_code,
            message=self.message,
            details=self.details or None,
        )


class ValidationError(PLapError, ValueError):
    """Invalid argument or violated precondition."""

    def __init__(self, message: str, field: Optional[str] = None):
        details = {"field": field} if field else None
        super().__init__(message, ErrorCode.VALIDATION_ERROR, details)


class InvalidDomainError(PLapError, ValueError):
    """Geometric description of a region is inconsistent."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message, ErrorCode.INVALID_DOMAIN, details)


class MeshResolutionError(PLapError, ValueError):
    """Resolution too coarse to resolve the domain."""

    def __init__(self, n: int, minimum: int = 4):
        super().__init__(
            f"Resolution n={n} is too small (need n >= {minimum})",
            ErrorCode.MESH_RESOLUTION,
            {"n": n, "minimum": minimum},
        )


class DimensionMismatchError(PLapError, ValueError):
    """Field length does not match the mesh."""

    def __init__(self, expected: int, got: int):
        super().__init__(
            f"Field has {got} values but the mesh has {expected} vertices",
            ErrorCode.DIMENSION_MISMATCH,
            {"expected": expected, "got": got},
        )


class InvalidExponentError(PLapError, ValueError):
    """Exponent outside (1, inf)."""

    def __init__(self, p: float):
        super().__init__(
            f"p must exceed 1 (got {p})",
            ErrorCode.INVALID_EXPONENT,
            {"p": p},
        )


class ZeroDenominatorError(PLapError, ArithmeticError):
    """Rayleigh quotient of a field with zero p-mass."""

    def __init__(self, message: str = "p-mass of the field is zero"):
        super().__init__(message, ErrorCode.ZERO_DENOMINATOR)


class UnconvergedError(PLapError):
    """Operation requires a converged eigenpair."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message, ErrorCode.UNCONVERGED, details)


class NoSignChangeError(PLapError):
    """Bracket endpoints do not separate the two branches."""

    def __init__(self, bracket: "tuple[float, float]", values: "tuple[float, float]"):
        super().__init__(
            f"No sign change of the branch difference on [{bracket[0]}, {bracket[1]}]",
            ErrorCode.NO_SIGN_CHANGE,
            {"bracket": list(bracket), "differences": list(values)},
        )


class QuadratureBudgetError(PLapError):
    """Adaptive quadrature ran out of evaluations before reaching its target."""

    def __init__(self, target: float, reached: float, evaluations: int):
        super().__init__(
            f"Quadrature budget exhausted: error estimate {reached:.3e} > target {target:.3e}",
            ErrorCode.QUADRATURE_BUDGET,
            {"target": target, "reached": reached, "evaluations": evaluations},
        )


class UnsupportedError(PLapError):
    """Requested combination is outside what the toolkit computes."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message, ErrorCode.UNSUPPORTED, details)


class ConfigurationError(PLapError):
    """Configuration file or environment could not be used."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message, ErrorCode.CONFIGURATION_ERROR, details)


USAGE_ERRORS = (
    ValidationError,
    InvalidDomainError,
    MeshResolutionError,
    InvalidExponentError,
    UnsupportedError,
    ConfigurationError,
)
