"""
Statistics service layer.
Correlations with leave-one-out jackknife errors, the normality surrogate
and standardized higher moments of replicate columns.
"""

import math
from typing import Dict, Sequence

import numpy as np
from scipy import stats

from app.utils.errors import DegenerateSample
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

MIN_JACKKNIFE = 10
MIN_KS = 50


def _column(values, name: str = "sample") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2 or not np.all(np.isfinite(arr)) or np.ptp(arr) == 0.0:
        raise DegenerateSample(f"{name} has no spread")
    return arr


def pearson(x, y) -> float:
    x = _column(x, "x")
    y = _column(y, "y")
    dx = x - x.mean()
    dy = y - y.mean()
    rho = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return max(-1.0, min(1.0, rho))


def jackknife_stderr(x, y) -> float:
    """
    Leave-one-replicate-out standard error of the Pearson correlation.

    NaN below ten replicates, or when dropping one replicate leaves a
    constant column.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < MIN_JACKKNIFE:
        return math.nan
    keep = ~np.eye(n, dtype=bool)
    try:
        loo = np.array([pearson(x[keep[i]], y[keep[i]]) for i in range(n)])
    except DegenerateSample:
        logger.warning("jackknife undefined: a leave-one-out column is constant")
        return math.nan
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def correlation(x, y) -> Dict[str, float]:
    """
    Pearson correlation, its square and the jackknife standard error.

    The standard error is NaN below ten replicates.

    Raises:
        DegenerateSample: If either column is constant
    """
    rho = pearson(x, y)
    return {"rho": rho, "rho2": rho * rho, "stderr": jackknife_stderr(x, y)}


def clt_check(samples: Sequence[float]) -> Dict[str, float]:
    """Kolmogorov-Smirnov distance of the standardized sample from N(0, 1)."""
    arr = _column(samples)
    if arr.size < MIN_KS:
        logger.warning("KS statistic on only %d samples", arr.size)
    z = (arr - arr.mean()) / arr.std(ddof=1)
    result = stats.kstest(z, "norm")
    return {"ks_stat": float(result.statistic), "n": int(arr.size)}


def shape_moments(samples: Sequence[float]) -> Dict[str, float]:
    """Skewness and excess kurtosis."""
    arr = _column(samples)
    return {
        "skewness": float(stats.skew(arr)),
        "kurtosis": float(stats.kurtosis(arr)),
    }
