"""The constant ``C(m, mt, lam) = inf { Psi_mt(u) : Psi_m(u) = 1, Phi(u) <= lam }``.

On the ``m``-sphere ``Psi_mt = 1 + Psi_{mt - m}``, so with ``m <= mt`` the
constant is at least one; the solver minimizes the excess ``Psi_{mt - m}``
and adds one back, which keeps that bound exact in floating point.

The energy cap is handled by a quadratic penalty with continuation. Each
start ends with a bisection along the chord to ``e1`` (which is strictly
feasible), so every candidate value comes from a feasible point and is an
upper bound for the infimum.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np

from ..energy import (
    WeightField,
    gagliardo_energy,
    gagliardo_gradient,
    weighted_lp_energy,
    weighted_lp_gradient,
)
from ..kernel import FractionalKernel
from .descent import projected_descent
from .first import solve_lambda1, try_normalize
from .types import SolverConfig

log = logging.getLogger(__name__)

N_STARTS = 8
_PENALTIES = (1e1, 1e3, 1e5, 1e7)
_STAGE_ITERS = 2000
_BISECT_STEPS = 60


class InfeasibleCapError(ValueError):
    """The energy cap admits no point of the sphere (``lambda_cap <= lambda_1(m)``)."""


def _excess(m: WeightField, m_tilde: WeightField) -> WeightField | None:
    d = m_tilde.values - m.values
    if np.any(d < 0):
        bad = int(np.argmax(d < 0))
        raise ValueError(f"need m <= m_tilde componentwise; fails at cell {bad} ({m.values[bad]} > {m_tilde.values[bad]})")
    if not np.any(d > 0):
        return None
    return WeightField(d, m.cell_volume, "m_tilde - m")


def _penalized(kernel, m, d, p, cap, mu):
    # 0-homogeneous objective  Psi_d/Psi_m + mu * max(0, Phi/Psi_m - cap)^2 / cap^2
    def fun(u):
        psi = weighted_lp_energy(m, p, u)
        if not psi > 0:
            return np.inf, np.zeros_like(u)
        dpsi = weighted_lp_gradient(m, p, u)
        q = weighted_lp_energy(d, p, u) / psi
        g = (weighted_lp_gradient(d, p, u) - q * dpsi) / psi
        R = gagliardo_energy(kernel, p, u) / psi
        over = R - cap
        if over > 0:
            gR = (gagliardo_gradient(kernel, p, u) - R * dpsi) / psi
            q += mu * over**2 / cap**2
            g = g + 2.0 * mu * over / cap**2 * gR
        return q, g

    return fun


def _feasible_on_chord(kernel, m, p, u, e1, cap):
    """Point closest to ``u`` on the normalized chord towards ``e1`` with ``Phi <= cap``."""
    def point(t):
        return try_normalize((1.0 - t) * u + t * e1, m, p)

    v = point(0.0)
    if v is not None and gagliardo_energy(kernel, p, v) <= cap:
        return v
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        v = point(mid)
        if v is not None and gagliardo_energy(kernel, p, v) <= cap:
            hi = mid
        else:
            lo = mid
    return point(hi)


def _start(kernel, m, p, e1, cap, rng):
    r = rng.standard_normal(e1.size)
    t = 1.0
    for _ in range(_BISECT_STEPS):
        v = try_normalize(e1 + t * r * np.linalg.norm(e1) / np.linalg.norm(r), m, p)
        if v is not None and gagliardo_energy(kernel, p, v) <= cap:
            return v
        t *= 0.5
    return e1.copy()


def compute_monotonicity_constant(
    kernel: FractionalKernel,
    m: WeightField,
    m_tilde: WeightField,
    p: float,
    lambda_cap: float,
    config: SolverConfig | None = None,
    e1=None,
    return_point: bool = False,
):
    """Estimate ``C(m, m_tilde, lambda_cap)`` by penalized multistart descent.

    Parameters
    ----------
    kernel, m, m_tilde, p
        Discrete problem; ``m <= m_tilde`` cell by cell.
    lambda_cap : float
        Energy cap. Must exceed ``lambda_1(m)``; the first eigenfunction is
        then a strictly feasible anchor.
    config : SolverConfig, optional
        Seeds ``config.seed .. config.seed + 7`` are used for the starts.
    e1 : array, optional
        First eigenfunction of ``m`` if already known.
    return_point : bool
        Also return the minimizing feasible point.

    Returns
    -------
    float or (float, ndarray)
        Best value over all starts; never below 1.
    """
    config = config or SolverConfig()
    d = _excess(m, m_tilde)
    if e1 is None:
        pair = solve_lambda1(kernel, m, p, config)
        e1, lam1 = pair.u, pair.lam
    else:
        e1 = np.asarray(e1, dtype=float)
        lam1 = gagliardo_energy(kernel, p, e1)
    if not lambda_cap > lam1 * (1.0 + 1e-12):
        raise InfeasibleCapError(
            f"no feasible starting point: lambda_cap = {lambda_cap!r} does not exceed lambda_1(m) = {lam1!r}"
        )
    if d is None:
        warnings.warn("m_tilde equals m; the constant is 1", RuntimeWarning, stacklevel=2)
        return (1.0, e1) if return_point else 1.0

    best_val, best_u = np.inf, None
    for k in range(N_STARTS):
        rng = np.random.default_rng(config.seed + k)
        u = _start(kernel, m, p, e1, lambda_cap, rng)
        for mu in _PENALTIES:
            fun = _penalized(kernel, m, d, p, lambda_cap, mu)
            res = projected_descent(
                fun,
                u,
                lambda v: try_normalize(v, m, p),
                lambda x, f, g: np.linalg.norm(g) * np.linalg.norm(x) < 1e-10 * max(f, 1e-300),
                max_iter=min(_STAGE_ITERS, config.max_iter),
                step_init=0.1 * config.step_init,
                backtrack=config.armijo_factor,
                memory=config.lbfgs_memory,
            )
            u = res.x
        u = _feasible_on_chord(kernel, m, p, u, e1, lambda_cap)
        val = weighted_lp_energy(d, p, u)
        log.debug("monotonicity start %d: excess %.12g", k, val)
        if val < best_val:
            best_val, best_u = val, u
    C = 1.0 + best_val
    return (C, best_u) if return_point else C
