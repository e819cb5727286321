"""Solvers for the first two eigenvalues, the p = 2 oracle and the monotonicity constant."""

from .first import NotNormalizableError, check_simplicity, fix_sign, normalize_to_sphere, solve_lambda1
from .monotonicity import InfeasibleCapError, compute_monotonicity_constant
from .oracle import OracleResult, p2_oracle_spectrum
from .second import PathInitError, lambda2_upper_from_nodal, nodal_check, solve_lambda2_path
from .types import EigenPair, SimplicityReport, SolverConfig, SymmetricPath

__all__ = [
    "EigenPair",
    "InfeasibleCapError",
    "NotNormalizableError",
    "OracleResult",
    "PathInitError",
    "SimplicityReport",
    "SolverConfig",
    "SymmetricPath",
    "check_simplicity",
    "compute_monotonicity_constant",
    "fix_sign",
    "lambda2_upper_from_nodal",
    "nodal_check",
    "normalize_to_sphere",
    "p2_oracle_spectrum",
    "solve_lambda1",
    "solve_lambda2_path",
]
