"""Option models for the energy functional and the eigenvalue solver."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EnergyOptions(BaseModel):
    """Exponent and gradient regularization of the discrete p-energy."""

    model_config = ConfigDict(frozen=True)

    p: float = Field(..., description="Exponent in (1, inf)")
    eps: float = Field(0.0, description="Gradient regularization, same units as |grad u|")

    @field_validator("p")
    @classmethod
    def validate_exponent(cls, v: float) -> float:
        """Validate p > 1."""
        if not v > 1:
            raise ValueError("p must exceed 1")
        return float(v)

    @field_validator("eps")
    @classmethod
    def validate_eps(cls, v: float) -> float:
        if v < 0:
            raise ValueError("eps must be non-negative")
        return float(v)


class SolveOptions(BaseModel):
    """Safeguarded descent settings for the first eigenpair."""

    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(200_000, description="Iteration cap")
    tol_lambda: float = Field(1e-10, description="Relative change of lambda between iterations")
    tol_grad: float = Field(1e-8, description="Predicted relative decrease g.d/lambda")
    armijo_c: float = Field(1e-4, description="Sufficient-decrease constant")
    armijo_shrink: float = Field(0.5, description="Backtracking factor")
    max_backtracks: int = Field(60, description="Backtracking steps before a stall is declared")
    eps_factor: float = Field(0.01, description="Initial eps relative to (h/diam)*rms|grad u|")
    eps_decay: float = Field(0.1, description="eps multiplier applied at each stall")
    eps_floor: float = Field(1e-12, description="Smallest relative eps before eps is switched off")
    preconditioner: Literal["hessian", "none"] = Field(
        "hessian", description="Descent metric: regularized energy Hessian or plain l2"
    )
    precond_every: int = Field(5, description="Refactor the energy Hessian every k iterations")
    weight_floor: float = Field(1e-8, description="Relative floor of the Hessian element weights")
    check_symmetry: bool = Field(True, description="Report reflection defects of the result")

    @field_validator("max_iters", "max_backtracks", "precond_every")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        """Validate positive integers."""
        if v <= 0:
            raise ValueError("Value must be positive")
        return v

    @field_validator("tol_lambda", "tol_grad", "eps_factor", "eps_floor", "weight_floor")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("Value must be positive")
        return float(v)

    @field_validator("armijo_c", "armijo_shrink", "eps_decay")
    @classmethod
    def validate_unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("Value must lie in (0, 1)")
        return float(v)

    @model_validator(mode="after")
    def validate_floor(self) -> "SolveOptions":
        if self.eps_floor > self.eps_factor:
            raise ValueError("eps_floor must not exceed eps_factor")
        return self

    def for_large_p(self) -> "SolveOptions":
        """Tightened eps floor used for p well above 2."""
        return self.model_copy(update={"eps_floor": min(self.eps_floor, 1e-14)})
