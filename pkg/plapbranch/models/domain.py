"""Geometric descriptions of the regions the toolkit works on."""

import math
from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Relative slack for tangency (disks touching walls or each other).
_GEOM_TOL = 1e-12


class DomainKind(str, Enum):
    """Supported region kinds."""

    RECTANGLE = "rectangle"
    TRIANGLE = "triangle"
    MASKED_RECTANGLE = "masked-rectangle"


class MaskMode(str, Enum):
    """How a disk list restricts the support of admissible fields."""

    INCLUDE = "include"  # fields live inside the union of disks
    EXCLUDE = "exclude"  # disks are holes


class Disk(BaseModel):
    """Closed disk with center and radius."""

    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    r: float = Field(..., gt=0, description="Disk radius")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    def distance_to(self, other: "Disk") -> float:
        return math.hypot(self.cx - other.cx, self.cy - other.cy)


class DomainSpec(BaseModel):
    """Rectangle (0,a)x(0,b), the unit right triangle, or a disk-masked rectangle."""

    model_config = ConfigDict(frozen=True)

    kind: DomainKind = DomainKind.RECTANGLE
    a: float = Field(1.0, description="Width")
    b: float = Field(1.0, description="Height")
    disks: Tuple[Disk, ...] = ()
    mode: MaskMode = MaskMode.INCLUDE

    @field_validator("a", "b")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        """Validate positive dimensions."""
        if not v > 0:
            raise ValueError("Rectangle dimensions must be positive")
        return float(v)

    @model_validator(mode="after")
    def validate_geometry(self) -> "DomainSpec":
        if self.kind is DomainKind.TRIANGLE and (self.a != 1.0 or self.b != 1.0):
            raise ValueError("The triangle domain is the unit right triangle (a=b=1)")
        if self.kind is not DomainKind.MASKED_RECTANGLE and self.disks:
            raise ValueError("Disks are only allowed on masked rectangles")
        scale = max(self.a, self.b)
        for disk in self.disks:
            if (
                disk.cx - disk.r < -_GEOM_TOL * scale
                or disk.cy - disk.r < -_GEOM_TOL * scale
                or disk.cx + disk.r > self.a + _GEOM_TOL * scale
                or disk.cy + disk.r > self.b + _GEOM_TOL * scale
            ):
                raise ValueError(f"Disk at {disk.center} with radius {disk.r} exits the rectangle")
        for i, first in enumerate(self.disks):
            for second in self.disks[i + 1 :]:
                if first.distance_to(second) < (first.r + second.r) * (1 - _GEOM_TOL):
                    raise ValueError(f"Disks at {first.center} and {second.center} overlap")
        return self

    @classmethod
    def rectangle(cls, a: float, b: float = 1.0) -> "DomainSpec":
        return cls(kind=DomainKind.RECTANGLE, a=a, b=b)

    @classmethod
    def triangle(cls) -> "DomainSpec":
        return cls(kind=DomainKind.TRIANGLE, a=1.0, b=1.0)

    @classmethod
    def masked(
        cls,
        a: float,
        b: float,
        disks: List[Disk],
        mode: MaskMode = MaskMode.INCLUDE,
    ) -> "DomainSpec":
        return cls(kind=DomainKind.MASKED_RECTANGLE, a=a, b=b, disks=tuple(disks), mode=mode)

    @property
    def area(self) -> float:
        """Area of the triangulated region (the bounding rectangle for masks)."""
        if self.kind is DomainKind.TRIANGLE:
            return 0.5
        return self.a * self.b

    @property
    def diameter(self) -> float:
        return math.hypot(self.a, self.b)

    @property
    def label(self) -> str:
        if self.kind is DomainKind.TRIANGLE:
            return "T1"
        if self.kind is DomainKind.RECTANGLE:
            return f"R[{self.a:g}x{self.b:g}]"
        return f"R[{self.a:g}x{self.b:g}]+{len(self.disks)}disks"
