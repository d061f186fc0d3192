"""Result models: eigenpairs, branches, crossings, quadrature values, run manifests."""

from dataclasses import dataclass, field
from datetime import datetime, timezone
import hashlib
import json
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, field_validator, model_validator

from plapbranch import __version__
from plapbranch.models.domain import DomainSpec

if TYPE_CHECKING:
    from plapbranch.numerics.mesh import TriMesh

BRANCH_LABELS = ("lambda1", "boxbar", "boxminus", "boxbslash", "lambda2-ub")


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Converged (or best-effort) first eigenpair on one mesh."""

    p: float
    domain: DomainSpec
    n: int
    lambda_: float
    field: npt.NDArray[np.float64]
    iterations: int
    grad_norm: float
    residual: float
    converged: bool
    sign_constant: bool = True
    scale: float = 1.0
    history: Tuple[float, ...] = ()
    symmetry_defects: Dict[str, float] = field(default_factory=dict)
    mesh: Optional["TriMesh"] = field(default=None, repr=False)
    note: str = ""

    def relabeled(self, value: float, note: str) -> "EigenResult":
        """Same eigenpair reported as an eigenvalue of another region."""
        return EigenResult(
            p=self.p,
            domain=self.domain,
            n=self.n,
            lambda_=value,
            field=self.field,
            iterations=self.iterations,
            grad_norm=self.grad_norm,
            residual=self.residual,
            converged=self.converged,
            sign_constant=self.sign_constant,
            scale=self.scale,
            history=self.history,
            symmetry_defects=self.symmetry_defects,
            mesh=self.mesh,
            note=note,
        )

    def summary(self) -> Dict[str, Any]:
        """JSON-ready summary (the field itself is omitted)."""
        return {
            "p": self.p,
            "domain": self.domain.model_dump(mode="json"),
            "scale": self.scale,
            "n": self.n,
            "lambda": self.lambda_,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "residual": self.residual,
            "converged": self.converged,
            "sign_constant": self.sign_constant,
            "symmetry_defects": dict(sorted(self.symmetry_defects.items())),
            "note": self.note,
        }


class BranchSample(BaseModel):
    """One (p, lambda) point of a branch."""

    p: float
    lambda_: float = Field(..., alias="lambda")
    n: int
    converged: bool
    iterations: int = 0
    residual: float = 0.0

    model_config = {"populate_by_name": True}


class Branch(BaseModel):
    """Labeled sequence of (p, lambda) samples for one eigenvalue family."""

    label: str
    a: float
    samples: List[BranchSample] = Field(default_factory=list)

    @field_validator("label")
    @classmethod
    def validate_label(cls, v: str) -> str:
        if v not in BRANCH_LABELS and not v.startswith("lin-"):
            raise ValueError(f"label must be one of {BRANCH_LABELS} or lin-k")
        return v

    @model_validator(mode="after")
    def validate_samples(self) -> "Branch":
        ps = [s.p for s in self.samples]
        if any(q <= p for p, q in zip(ps, ps[1:])):
            raise ValueError("p must be strictly increasing across samples")
        if any(not s.lambda_ > 0 for s in self.samples):
            raise ValueError("all lambdas must be positive")
        return self

    @property
    def ps(self) -> List[float]:
        return [s.p for s in self.samples]

    @property
    def lambdas(self) -> List[float]:
        return [s.lambda_ for s in self.samples]


class CrossingReport(BaseModel):
    """Bisection estimate of the parameter where two branches meet."""

    branch_a: str
    branch_b: str
    a: float
    bracket: Tuple[float, float]
    p_star: float
    tol: float
    values_at_p_star: Tuple[float, float]
    function_tol: float
    evaluations: int

    @model_validator(mode="after")
    def validate_bracket(self) -> "CrossingReport":
        lo, hi = self.bracket
        if not lo < self.p_star < hi:
            raise ValueError("p_star must lie strictly inside the bracket")
        return self

    @property
    def gap(self) -> float:
        return abs(self.values_at_p_star[0] - self.values_at_p_star[1])


class QuadResult(BaseModel):
    """Value of an adaptive quadrature with its error estimate."""

    value: float
    err_estimate: float = Field(..., ge=0)
    evaluations: int = Field(..., ge=1)
    panels: int = 1


class RunManifest(BaseModel):
    """Provenance of one CLI invocation."""

    command: str
    options: Dict[str, Any]
    version: str = __version__
    timestamp: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    solves: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def digest(self) -> str:
        """Hash of command, options and version; the timestamp is excluded."""
        payload = json.dumps(
            {"command": self.command, "options": self.options, "version": self.version},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def record(self, result: EigenResult, label: str = "") -> int:
        """Append a convergence summary; returns its row id."""
        entry = {"id": len(self.solves), "label": label, **result.summary()}
        self.solves.append(entry)
        return entry["id"]

    def record_branch(self, branch: Branch) -> List[int]:
        """One entry per sample, in sample order (the CSV row order)."""
        ids = []
        for s in branch.samples:
            entry = {
                "id": len(self.solves),
                "label": branch.label,
                "a": branch.a,
                **s.model_dump(by_alias=True),
            }
            self.solves.append(entry)
            ids.append(entry["id"])
        return ids
