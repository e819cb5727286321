"""First eigenvalue as the minimum of ``Phi`` on the weighted sphere."""

from __future__ import annotations

import logging

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
from .types import EigenPair, SimplicityReport, SolverConfig

log = logging.getLogger(__name__)

_INIT_RETRIES = 10


class NotNormalizableError(ValueError):
    """``Psi_m(u) <= 0``: the function cannot be scaled onto the sphere."""


def normalize_to_sphere(u, weight: WeightField, p: float) -> np.ndarray:
    """Scale ``u`` so that ``Psi_m(u) = 1``."""
    psi = weighted_lp_energy(weight, p, u)
    if not psi > 0:
        raise NotNormalizableError(f"Psi_m(u) = {psi!r} is not positive; cannot normalize")
    return np.asarray(u, dtype=float) / psi ** (1.0 / p)


def try_normalize(u, weight: WeightField, p: float):
    psi = weighted_lp_energy(weight, p, u)
    if not psi > 0 or not np.isfinite(psi):
        return None
    return u / psi ** (1.0 / p)


def fix_sign(u: np.ndarray) -> np.ndarray:
    """Flip ``u`` so that its largest-magnitude entry (lowest index on ties) is positive."""
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u


def rayleigh_objective(kernel: FractionalKernel, weight: WeightField, p: float):
    """``u -> (R(u), grad R(u))`` with ``R = Phi / Psi_m``; ``inf`` off the positive cone.

    The returned callable also records the relative residual of the last
    evaluation in its ``last_residual`` attribute.
    """

    def fun(u):
        psi = weighted_lp_energy(weight, p, u)
        if not psi > 0:
            fun.last_residual = np.inf
            return np.inf, np.zeros_like(u)
        phi = gagliardo_energy(kernel, p, u)
        dphi = gagliardo_gradient(kernel, p, u)
        dpsi = weighted_lp_gradient(weight, p, u)
        R = phi / psi
        r = dphi - R * dpsi
        nd = np.linalg.norm(dphi)
        fun.last_residual = float(np.linalg.norm(r) / nd) if nd > 0 else np.inf
        return R, r / psi

    fun.last_residual = np.inf
    return fun


def _check_sizes(kernel: FractionalKernel, weight: WeightField) -> None:
    if kernel.n_cells != weight.n_cells:
        raise ValueError(f"kernel has {kernel.n_cells} cells but weight has {weight.n_cells}")


def initial_positive_guess(weight: WeightField, p: float, rng: np.random.Generator) -> np.ndarray:
    support = weight.values > 0
    for _ in range(_INIT_RETRIES):
        u = np.maximum(rng.standard_normal(weight.n_cells), 0.0) * support
        v = try_normalize(u, weight, p)
        if v is not None:
            return v
    raise NotNormalizableError(f"no normalizable starting point after {_INIT_RETRIES} draws")


def solve_lambda1(
    kernel: FractionalKernel,
    weight: WeightField,
    p: float,
    config: SolverConfig | None = None,
    u0=None,
) -> EigenPair:
    """Minimize the Rayleigh quotient ``Phi / Psi_m`` over the weighted sphere.

    Starts from the positive part of a seeded Gaussian vector restricted to
    ``{m > 0}`` (or from ``u0``), then runs projected descent with Armijo
    backtracking until the relative residual drops below
    ``config.tol_residual``. The eigenfunction is returned positive.
    """
    config = config or SolverConfig()
    _check_sizes(kernel, weight)
    if u0 is None:
        u0 = initial_positive_guess(weight, p, np.random.default_rng(config.seed))
    else:
        u0 = normalize_to_sphere(u0, weight, p)

    fun = rayleigh_objective(kernel, weight, p)

    def converged(u, f, g):
        return fun.last_residual < config.tol_residual

    trace = None
    if config.verbose:
        def trace(it, u, f):
            log.info("lambda1,%d,%.16e,%.3e", it, f, fun.last_residual)

    res = projected_descent(
        fun,
        u0,
        lambda v: try_normalize(v, weight, p),
        converged,
        max_iter=config.max_iter,
        step_init=config.step_init,
        backtrack=config.armijo_factor,
        memory=config.lbfgs_memory,
        callback=trace,
    )
    u = fix_sign(res.x)
    lam = gagliardo_energy(kernel, p, u)
    fun(u)
    if not res.converged:
        log.warning("solve_lambda1 stopped (%s) at residual %.3e", res.status, fun.last_residual)
    return EigenPair(lam, u, fun.last_residual, res.iterations, bool(res.converged))


def check_simplicity(
    kernel: FractionalKernel,
    weight: WeightField,
    p: float,
    config: SolverConfig | None = None,
    trials: int = 5,
) -> SimplicityReport:
    """Multi-start agreement of the first eigenpair.

    Runs :func:`solve_lambda1` from seeds ``config.seed .. config.seed + trials - 1``
    and reports the spread of eigenvalues and the largest pairwise max-norm
    distance between the (positive, normalized) eigenfunctions.
    """
    config = config or SolverConfig()
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pairs = []
    for k in range(trials):
        pair = solve_lambda1(kernel, weight, p, config.with_seed(config.seed + k))
        if not pair.converged:
            raise RuntimeError(
                f"trial {k} (seed {config.seed + k}) did not converge: residual {pair.residual:.3e}"
            )
        pairs.append(pair)
    lambdas = np.array([q.lam for q in pairs])
    U = np.array([q.u for q in pairs])
    dist = 0.0
    for i in range(trials):
        for j in range(i + 1, trials):
            dist = max(dist, float(np.max(np.abs(U[i] - U[j]))))
    return SimplicityReport(lambdas, float(lambdas.max() - lambdas.min()), dist, trials)
