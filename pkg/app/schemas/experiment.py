"""
Pydantic schemas for Monte Carlo experiments.
"""

from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.field import Interval

STAT_NAMES = ("crit", "h2", "h3", "h4", "nodal", "area", "euler")


class ExperimentConfig(BaseModel):
    """A replicate experiment; JSON files and CLI flags both build one."""

    ells: List[int] = Field(..., min_length=1)
    replicates: int = Field(..., ge=2)
    master_seed: int = Field(0, ge=0, lt=2**64)
    grid_factor: int = 8
    intervals: List[Interval] = Field(default_factory=list)
    thresholds: List[float] = Field(default_factory=list)
    stats: List[str] = Field(default_factory=lambda: list(STAT_NAMES))
    out: Optional[str] = None

    @field_validator("ells")
    @classmethod
    def check_ells(cls, v: List[int]) -> List[int]:
        if any(ell < 2 for ell in v):
            raise ValueError("every degree must be at least 2")
        return v

    @field_validator("stats")
    @classmethod
    def check_stats(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(STAT_NAMES))
        if unknown:
            raise ValueError(f"unknown statistics: {', '.join(unknown)}")
        # fixed order keeps the CSV header independent of flag order
        return [s for s in STAT_NAMES if s in v]

    @model_validator(mode="after")
    def check_grid(self):
        if self.grid_factor * min(self.ells) < 16:
            raise ValueError("grid_factor * ell must be at least 16 for every degree")
        return self

    def wants(self, stat: str) -> bool:
        return stat in self.stats

    def columns(self) -> List[str]:
        """CSV header in its fixed order."""
        cols = ["ell", "replicate", "seed"]
        if self.wants("crit"):
            cols += ["n_crit", "n_min", "n_saddle", "n_max"]
            cols += [f"n_crit_I{i + 1}" for i in range(len(self.intervals))]
        for q in (2, 3, 4):
            if self.wants(f"h{q}"):
                cols.append(f"h{q}")
        if self.wants("h4"):
            cols.append("A_ell")
        if self.wants("nodal"):
            cols.append("nodal_len")
        if self.wants("area"):
            cols += [f"area_u{i + 1}" for i in range(len(self.thresholds))]
        if self.wants("euler") and self.wants("crit"):
            cols += [f"euler_u{i + 1}" for i in range(len(self.thresholds))]
        return cols


class ColumnSummary(BaseModel):
    mean: float
    variance: float
    skewness: Optional[float] = None
    kurtosis: Optional[float] = None


class CorrelationRow(BaseModel):
    ell: int
    x: str
    y: str
    rho: float
    rho2: float
    stderr: Optional[float] = None


class DegreeSummary(BaseModel):
    ell: int
    n: int
    columns: Dict[str, ColumnSummary]
    correlations: List[CorrelationRow] = Field(default_factory=list)
    ks_stat_n_crit: Optional[float] = None


class ExperimentSummary(BaseModel):
    config: ExperimentConfig
    degrees: List[DegreeSummary]
    failed: List[Dict[str, int]] = Field(default_factory=list)


class ExperimentResult(BaseModel):
    columns: List[str]
    rows: List[Dict[str, Union[int, float]]]
    summary: ExperimentSummary
