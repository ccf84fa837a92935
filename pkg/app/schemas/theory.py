"""
Pydantic schemas for closed-form predictions and verification reports.
"""

import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class PredictedStats(BaseModel):
    """Leading-order moments of the critical point count and the trispectrum proxy."""

    ell: int
    mean_crit: float
    var_crit_leading: float
    var_h4_leading: float
    var_A_leading: float
    cov_crit_A_leading: float
    scale_A: float


class LipschitzKilling(BaseModel):
    """Expected excursion-set functionals at a threshold."""

    u: float
    euler: float
    boundary_length: float = Field(..., description="Half the level-curve length")
    level_length: float
    area: float


class LipschitzKillingFluctuation(BaseModel):
    """Leading second-chaos fluctuations for a given h_{ell;2}."""

    u: float
    euler: float
    boundary_length: float
    area: float


class CoefficientEstimate(BaseModel):
    """One fourth-order projection coefficient."""

    pattern: Tuple[int, int, int, int, int]
    method: str
    value: float
    stderr: float = 0.0
    n_samples: Optional[int] = None


class MomentEstimate(BaseModel):
    """I_r = E[|Z1 Z3 - Z2^2| (Z1 - 3 Z3)^r]."""

    r: int
    method: str
    value: float
    stderr: float = 0.0
    n_samples: Optional[int] = None


class CoeffReport(BaseModel):
    """The three leading coefficients and the moments they are built from."""

    method: str
    k2: float
    k5: float
    h25: float
    I0: float
    I2: float
    I4: float
    stderr: Dict[str, float] = Field(default_factory=dict)

    def identity_residuals(self) -> Dict[str, float]:
        """k5 and h25 minus their expressions through I0, I2, I4."""
        k5 = (self.I4 / 4608.0 - self.I2 / 32.0 + 3.0 * self.I0 / 8.0) / math.pi
        h25 = (-self.I2 / 192.0 + self.I0 / 8.0) / math.pi
        return {"k5": self.k5 - k5, "h25": self.h25 - h25}


class LemmaIntegral(BaseModel):
    ell: int
    r1: int
    r2: int
    value: float
    asymptotic: float


class DominantTerms(BaseModel):
    """Finite-degree dominant covariance integrals and their targets."""

    ell: int
    gradient_term: float
    hessian_term: float
    cross_term: float
    gradient_target: float
    hessian_target: float
    cross_target: float
    max_abs_y1: float
    max_abs_y4: float


class PredictedCovariance(BaseModel):
    ell: int
    cov_crit_h4: float
    cov_crit_A: float
    cov_crit_h4_leading: float
    cov_crit_A_leading: float


class SigmaResponse(BaseModel):
    ell: int
    sigma: List[List[float]]
    cholesky: List[List[float]]
    taus: List[float]


class DensityPoint(BaseModel):
    t: float
    pi1c: float
    p3c: float


class DensityTable(BaseModel):
    points: List[DensityPoint]
    total_pi1c: float
    total_p3c: float
    positive_p3c: float


class CheckResult(BaseModel):
    """One verification check."""

    suite: str
    name: str
    expected: float
    observed: float
    tolerance: float
    passed: bool


class VerificationReport(BaseModel):
    suite: str
    checks: List[CheckResult]
    passed: bool = True

    @model_validator(mode="after")
    def compute_passed(self):
        self.passed = all(c.passed for c in self.checks)
        return self
