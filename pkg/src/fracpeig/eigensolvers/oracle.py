"""Exact solver for the linear (p = 2) problem ``A u = lam M u``."""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la

from ..energy import WeightField, gagliardo_energy, residual_norm
from ..kernel import FractionalKernel
from .first import fix_sign, normalize_to_sphere
from .types import EigenPair

log = logging.getLogger(__name__)


class OracleResult(list):
    """List of eigenpairs; ``truncated`` is set when fewer than requested exist."""

    truncated: bool = False
    requested: int = 0


def p2_oracle_spectrum(kernel: FractionalKernel, weight: WeightField, count: int = 2) -> OracleResult:
    """Smallest ``count`` positive eigenvalues of the pencil ``(A, M)``.

    ``A`` is the stiffness matrix of the p = 2 energy and
    ``M = diag(m_i h^N)`` may be indefinite. With ``A = L L^T`` the symmetric
    matrix ``L^-1 M L^-T`` has eigenvalues ``mu = 1 / lam``; only ``mu > 0``
    give positive eigenvalues.
    """
    if kernel.p != 2:
        raise ValueError(f"oracle needs a kernel assembled with p = 2, got p = {kernel.p}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if kernel.n_cells != weight.n_cells:
        raise ValueError("kernel and weight sizes differ")
    A = kernel.stiffness_matrix()
    try:
        L = la.cholesky(A, lower=True)
    except la.LinAlgError as exc:
        raise ArithmeticError("stiffness matrix is not positive definite") from exc
    M = np.diag(weight.values * weight.cell_volume)
    X = la.solve_triangular(L, M, lower=True)
    B = la.solve_triangular(L, X.T, lower=True)
    B = 0.5 * (B + B.T)
    mu, Y = la.eigh(B)
    order = np.argsort(-mu)
    out = OracleResult()
    out.requested = count
    for k in order:
        if not mu[k] > 0 or len(out) == count:
            break
        v = la.solve_triangular(L, Y[:, k], lower=True, trans="T")
        v = fix_sign(normalize_to_sphere(v, weight, 2.0))
        lam = gagliardo_energy(kernel, 2.0, v)
        out.append(EigenPair(lam, v, residual_norm(kernel, weight, 2.0, lam, v), 0, True))
    if len(out) < count:
        out.truncated = True
        log.warning("only %d positive eigenvalues exist (%d requested)", len(out), count)
    return out
