"""
Exceptions raised by the lab services.

Routers translate these into HTTP errors and the CLI into exit codes.
"""

from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class GridTooSmall(LabError, ValueError):
    """A quadrature grid cannot integrate the requested integrand exactly."""


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration."""


class UnsupportedPattern(LabError, ValueError):
    """A Hermite index pattern that the requested method cannot evaluate."""


class DegenerateSample(LabError, ValueError):
    """A statistic needs spread in the data but the sample is constant."""


class DegenerateCritical(LabError):
    """A converged critical point with (numerically) singular Hessian."""

    def __init__(self, theta: float, phi: float, hess_det: float):
        self.theta = theta
        self.phi = phi
        self.hess_det = hess_det
        super().__init__(
            f"degenerate critical point at theta={theta:.6f}, phi={phi:.6f} "
            f"(det={hess_det:.3e})"
        )


class IncompleteMorse(LabError):
    """The Morse relation n_min - n_saddle + n_max = 2 failed."""

    def __init__(self, n_min: int, n_saddle: int, n_max: int, grid_factor: int):
        self.n_min = n_min
        self.n_saddle = n_saddle
        self.n_max = n_max
        self.grid_factor = grid_factor
        super().__init__(
            f"Morse relation failed with grid factor {grid_factor}: "
            f"{n_min} - {n_saddle} + {n_max} = {n_min - n_saddle + n_max}"
        )


class QuadratureError(LabError):
    """An adaptive quadrature stopped before reaching its tolerance."""

    def __init__(self, message: str, achieved: Optional[float] = None):
        self.achieved = achieved
        super().__init__(
            message if achieved is None else f"{message} (achieved {achieved:.3e})"
        )


class ReplicateBudgetExceeded(LabError):
    """Too many replicates of an experiment failed."""

    def __init__(self, failed: int, total: int, budget: float):
        self.failed = failed
        self.total = total
        self.budget = budget
        super().__init__(
            f"{failed} of {total} replicates failed (budget {budget:.1%})"
        )
