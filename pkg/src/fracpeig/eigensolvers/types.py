from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolverConfig:
    tol_residual: float = 1e-8
    max_iter: int = 50000
    step_init: float = 1.0
    armijo_factor: float = 0.5
    seed: int = 0
    path_points: int = 64
    lse_temperatures: tuple[float, ...] = (10.0, 100.0, 1000.0)
    omega_samples: int = 1024
    lbfgs_memory: int = 12
    verbose: bool = False

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.step_init > 0):
            raise ValueError("tolerances and initial step must be positive")
        if not 0 < self.armijo_factor < 1:
            raise ValueError("armijo_factor must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.path_points < 8:
            raise ValueError("path_points must be >= 8")
        temps = tuple(float(t) for t in self.lse_temperatures)
        if not temps or any(t <= 0 for t in temps):
            raise ValueError("lse_temperatures must be positive")
        self.lse_temperatures = temps
        if self.omega_samples < 4:
            raise ValueError("omega_samples must be >= 4")

    def with_seed(self, seed: int) -> "SolverConfig":
        return SolverConfig(**{**self.__dict__, "seed": int(seed)})


@dataclass
class EigenPair:
    """Eigenvalue estimate with its eigenfunction normalized to ``Psi_m(u) = 1``."""

    lam: float
    u: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    converged: bool

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class SymmetricPath:
    """Half of an odd loop on the weighted sphere.

    ``points[k]`` is the image of the angle ``pi k / K``; the other half of
    the loop is ``-points``.
    """

    points: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    iterations: int = 0
    converged: bool = False
    residual: float = np.nan

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.energies))

    @property
    def max_point(self) -> np.ndarray:
        return self.points[self.argmax]

    def closed_loop(self) -> np.ndarray:
        """All ``2K`` points of the loop, in order."""
        return np.concatenate([self.points, -self.points])


@dataclass
class SimplicityReport:
    lambdas: np.ndarray
    eigenvalue_spread: float
    eigenfunction_distance: float
    trials: int
