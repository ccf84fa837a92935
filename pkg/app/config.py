"""
Configuration management using Pydantic Settings.
Loads environment variables from .env file.
"""

import os

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Lab settings loaded from environment variables."""

    # Workers
    HC_THREADS: int = 0  # 0 means one worker per CPU

    # Logging
    HC_LOG_LEVEL: str = "INFO"

    # Legendre asymptotics
    HC_HILB_C: float = 1.0
    HC_HILB_ENVELOPE: float = 5.0

    # Critical point search
    HC_GRID_FACTOR: int = 8
    HC_DEDUP_RADIUS: float = 1e-3  # in units of 1/ell
    HC_DEDUP_VALUE_TOL: float = 1e-8
    HC_NEWTON_MAX_ITER: int = 30
    HC_NEWTON_TOL: float = 1e-10  # in units of lambda_ell
    HC_DEGENERATE_TOL: float = 1e-10  # in units of lambda_ell ** 2

    # Level sets and excursion sets
    HC_NODAL_RESOLUTION: int = 16  # cells per great circle, per unit ell
    HC_AREA_QMAX: int = 8

    # Monte Carlo
    HC_MC_CHUNK: int = 1_000_000
    HC_FAILURE_BUDGET: float = 0.01

    @property
    def worker_count(self) -> int:
        """Number of worker processes, never below one."""
        if self.HC_THREADS > 0:
            return self.HC_THREADS
        return max(1, os.cpu_count() or 1)

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
