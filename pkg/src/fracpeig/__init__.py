"""Weighted eigenvalues of the fractional p-Laplacian on uniform grids.

The discrete problem is ``Phi'(u) = lam Psi_m'(u)`` with ``Phi`` the
Gagliardo energy and ``Psi_m(u) = int m |u|^p`` for a sign-changing
weight ``m``.
"""

__version__ = "0.1.0"

from .energy import WeightField, gagliardo_energy, rayleigh_quotient, residual_norm, weighted_lp_energy
from .grid import Domain, DomainSpec, build_grid
from .kernel import FractionalKernel, assemble_kernel

__all__ = [
    "Domain",
    "DomainSpec",
    "FractionalKernel",
    "WeightField",
    "__version__",
    "assemble_kernel",
    "build_grid",
    "gagliardo_energy",
    "rayleigh_quotient",
    "residual_norm",
    "weighted_lp_energy",
]
