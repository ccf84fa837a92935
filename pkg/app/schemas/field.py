"""
Pydantic schemas for sampled fields and their local geometry.
"""

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class LegendreTriple(BaseModel):
    """Value and first two derivatives of P_ell at one argument."""

    p: float
    dp: float
    ddp: float


class SpherePoint(BaseModel):
    """Point on the unit sphere in colatitude/longitude."""

    theta: float = Field(..., ge=0.0, le=math.pi, description="Colatitude")
    phi: float = Field(0.0, description="Longitude, reduced to [0, 2 pi)")

    @field_validator("phi")
    def reduce_longitude(cls, value):
        return value % (2.0 * math.pi)

    def unit_vector(self) -> List[float]:
        st = math.sin(self.theta)
        return [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]

    def distance(self, other: "SpherePoint") -> float:
        """Geodesic distance."""
        cos_d = math.cos(self.theta) * math.cos(other.theta) + math.sin(
            self.theta
        ) * math.sin(other.theta) * math.cos(self.phi - other.phi)
        return math.acos(max(-1.0, min(1.0, cos_d)))


class Jet2(BaseModel):
    """Value, covariant gradient and covariant Hessian in the orthonormal frame."""

    f: float
    g1: float
    g2: float
    h11: float
    h12: float
    h22: float


class CriticalKind(str, Enum):
    MINIMUM = "minimum"
    SADDLE = "saddle"
    MAXIMUM = "maximum"


class CriticalPoint(BaseModel):
    """Refined critical point."""

    point: SpherePoint
    value: float
    kind: CriticalKind
    residual: float = Field(..., ge=0.0)
    hess_det: float


class Interval(BaseModel):
    """Value interval; a missing bound means unbounded on that side."""

    lo: Optional[float] = None
    hi: Optional[float] = None

    @model_validator(mode="after")
    def check_order(self):
        if self.lo is not None and self.hi is not None and self.lo >= self.hi:
            raise ValueError("interval lower bound must be below upper bound")
        return self

    @property
    def lower(self) -> float:
        return -math.inf if self.lo is None else self.lo

    @property
    def upper(self) -> float:
        return math.inf if self.hi is None else self.hi

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def label(self) -> str:
        lo = "-inf" if self.lo is None else repr(self.lo)
        hi = "inf" if self.hi is None else repr(self.hi)
        return f"[{lo},{hi}]"


class CritSummary(BaseModel):
    """Counts by Morse type plus per-interval counts."""

    n_min: int
    n_saddle: int
    n_max: int
    interval_counts: List[int] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return self.n_min + self.n_saddle + self.n_max

    @property
    def euler(self) -> int:
        return self.n_min - self.n_saddle + self.n_max


class FieldRecord(BaseModel):
    """Serialized field: the chart-B coefficients are recomputed on load."""

    ell: int = Field(..., ge=1)
    seed: int = Field(..., ge=0, lt=2**64)
    coeffs_a: List[float]

    @model_validator(mode="after")
    def check_length(self):
        if len(self.coeffs_a) != 2 * self.ell + 1:
            raise ValueError(
                f"expected {2 * self.ell + 1} coefficients, got {len(self.coeffs_a)}"
            )
        return self


class JetResponse(BaseModel):
    """Jet of a field at a point, with the trace-identity residual."""

    ell: int
    seed: int
    point: SpherePoint
    jet: Jet2
    trace_residual: float


class CriticalPointsResponse(BaseModel):
    """Critical point listing for one field."""

    ell: int
    seed: int
    summary: CritSummary
    points: List[CriticalPoint]
