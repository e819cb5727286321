"""Second eigenvalue as a minimax over odd loops on the weighted sphere.

A loop is stored as ``K`` points ``f_0 .. f_{K-1}`` for angles ``pi k / K``;
oddness supplies the other half (``f(-w) = -f(w)``), so the point after
``f_{K-1}`` is ``-f_0``.

The loop is optimized in two phases:

1. log-sum-exp relaxation of ``max_k R(f_k)`` minimized over all points
   at increasing temperatures;
2. a climbing-image string iteration: the highest point ascends along the
   loop tangent and descends in all other directions, the others descend
   perpendicular to the loop and are redistributed. The climbing point
   converges to the saddle of ``R`` on the sphere, i.e. to a nodal
   eigenfunction whose eigenvalue is the loop maximum.

The LSE stages redistribute every few iterations and only move points
perpendicular to the loop. Without that the points bunch up around the
maximum and the discrete max drops below the true loop max.

For p < 2 the Hessian of ``R`` blows up where neighbouring values meet or
where ``u`` is close to zero (e.g. on the part where a sign-changing weight
is negative), and the explicit climbing step either gets tiny or cycles.
Once the climbing residual is small, or stops improving, the top point is
therefore finished with a Levenberg-Marquardt solve of
``Phi'(u) = R(u) Psi_m'(u)``, ``Psi_m(u) = 1`` and swapped back into the
loop. The swap is accepted only if the result is still sign-changing and
its eigenvalue agrees with the loop's top value to ``_POLISH_GATE``.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import least_squares
from scipy.special import logsumexp, softmax

from ..energy import (
    WeightField,
    batch_rayleigh,
    gagliardo_energy,
    gagliardo_gradient,
    rayleigh_quotient,
    residual_norm,
    weighted_lp_energy,
    weighted_lp_gradient,
)
from ..kernel import FractionalKernel
from .descent import projected_descent
from .first import fix_sign, try_normalize
from .types import SolverConfig, SymmetricPath

log = logging.getLogger(__name__)

_PERTURB_ATTEMPTS = 100
_STAGE_ITERS = 400
_REFINE_CHECK = 50
_REDISTRIBUTE_EVERY = 20
# climbing residual at which the top point is handed to the LM polish
_POLISH_AT = 1e-3
# climbing gives up after this many iterations without a new best residual
_STALL = 1000
# the polished eigenvalue may differ from the loop's top value by this much
_POLISH_GATE = 1e-3


class PathInitError(RuntimeError):
    pass


def _normalize_rows(X: np.ndarray, weight: WeightField, p: float):
    psi = weight.cell_volume * (np.abs(X) ** p) @ weight.values
    if np.any(~(psi > 0)) or not np.all(np.isfinite(psi)):
        return None
    return X / psi[:, None] ** (1.0 / p)


def _sign_changing_direction(kernel, weight, p, e1, rng):
    A = kernel.stiffness_matrix()
    dpsi = weighted_lp_gradient(weight, p, e1)
    for _ in range(_PERTURB_ATTEMPTS):
        v = np.linalg.solve(A, rng.standard_normal(e1.size))
        v -= (dpsi @ v) / (dpsi @ e1) * e1
        if v.max() > 0 and v.min() < 0:
            return v * (np.linalg.norm(e1) / np.linalg.norm(v))
    raise PathInitError("could not draw a sign-changing direction")


def initial_path(kernel, weight: WeightField, p: float, e1: np.ndarray, n_points: int, rng) -> np.ndarray:
    """Half-loop ``e1 -> v -> -e1`` through a seeded sign-changing ``v``.

    Points with ``Psi_m <= 0`` are nudged toward the nearer of ``+-e1``.
    """
    v = _sign_changing_direction(kernel, weight, p, e1, rng)
    points = []
    for k in range(n_points):
        theta = np.pi * k / n_points
        w = np.cos(theta) * e1 + np.sin(theta) * v
        toward = 1.0 if np.cos(theta) >= 0 else -1.0
        eps = 1e-3
        for _ in range(_PERTURB_ATTEMPTS):
            f = try_normalize(w, weight, p)
            if f is not None:
                break
            w = w + eps * toward * e1
            eps *= 1.5
        else:
            raise PathInitError(f"interpolant {k} not normalizable after {_PERTURB_ATTEMPTS} perturbations")
        points.append(f)
    return np.array(points)


def _closed(X: np.ndarray) -> np.ndarray:
    return np.vstack([X, -X[:1]])


def redistribute(X: np.ndarray, weight: WeightField, p: float, fixed=(0,)) -> np.ndarray:
    """Equalize chord lengths between consecutive points, keeping ``fixed`` indices in place.

    Points between consecutive fixed indices are moved along the piecewise
    linear path and renormalized. Returns ``X`` unchanged if any
    interpolant leaves the positive cone.
    """
    K = X.shape[0]
    ext = _closed(X)
    anchors = sorted(set(fixed) | {0}) + [K]
    out = X.copy()
    for a, b in zip(anchors[:-1], anchors[1:]):
        if b - a < 2:
            continue
        seg = ext[a:b + 1]
        lengths = np.linalg.norm(np.diff(seg, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(lengths)])
        if arc[-1] == 0:
            continue
        targets = np.linspace(0.0, arc[-1], b - a + 1)[1:-1]
        j = np.clip(np.searchsorted(arc, targets, side="right") - 1, 0, len(lengths) - 1)
        frac = (targets - arc[j]) / np.where(lengths[j] > 0, lengths[j], 1.0)
        interp = seg[j] + frac[:, None] * (seg[j + 1] - seg[j])
        interp = _normalize_rows(interp, weight, p)
        if interp is None:
            log.debug("redistribution skipped: interpolant left the positive cone")
            return X
        out[a + 1:b] = interp
    return out


def _lse_stage(kernel, weight, p, X, beta, scale, config):
    shape = X.shape

    def fun(flat):
        Y = flat.reshape(shape)
        R, G, _ = batch_rayleigh(kernel, weight, p, Y)
        if not np.all(np.isfinite(R)):
            return np.inf, np.zeros_like(flat)
        z = beta * R / scale
        F = scale / beta * logsumexp(z)
        # Drop the along-path component so points do not slide together;
        # -P g is still a descent direction for F.
        T = _tangents(Y)
        G = G - np.sum(G * T, axis=1, keepdims=True) * T
        return F, (softmax(z)[:, None] * G).ravel()

    def retract(flat):
        Y = _normalize_rows(flat.reshape(shape), weight, p)
        return None if Y is None else Y.ravel()

    def done(flat, F, g):
        return np.linalg.norm(g) * np.linalg.norm(flat) < 1e-8 * abs(F)

    used = 0
    budget = min(_STAGE_ITERS, config.max_iter)
    while used < budget:
        res = projected_descent(
            fun,
            X.ravel(),
            retract,
            done,
            max_iter=min(_REDISTRIBUTE_EVERY, budget - used),
            step_init=0.1 * config.step_init,
            backtrack=config.armijo_factor,
            memory=config.lbfgs_memory,
        )
        used += max(res.iterations, 1)
        X = redistribute(res.x.reshape(shape), weight, p)
        if res.converged or res.status == "line search failed":
            break
    return X, used


def _tangents(X: np.ndarray) -> np.ndarray:
    prev = np.vstack([-X[-1:], X[:-1]])
    nxt = np.vstack([X[1:], -X[:1]])
    T = nxt - prev
    T -= np.sum(T * X, axis=1, keepdims=True) / np.sum(X * X, axis=1, keepdims=True) * X
    return T / np.linalg.norm(T, axis=1, keepdims=True)


def _curvature_bound(kernel, weight, p, u, rng, iters: int = 20) -> float:
    # Largest Hessian eigenvalue of R at u, by power iteration on
    # finite-difference Hessian-vector products.
    v = rng.standard_normal(u.size)
    v -= (v @ u) / (u @ u) * u
    v /= np.linalg.norm(v)
    eps = 1e-6 * np.linalg.norm(u)
    lam = 0.0
    for _ in range(iters):
        _, G, _ = batch_rayleigh(kernel, weight, p, np.array([u + eps * v, u - eps * v]))
        Hv = (G[0] - G[1]) / (2 * eps)
        Hv -= (Hv @ u) / (u @ u) * u
        lam = float(np.linalg.norm(Hv))
        if lam == 0:
            break
        v = Hv / lam
    return lam


def _climbing_refine(kernel, weight, p, X, config, rng):
    L = _curvature_bound(kernel, weight, p, X[np.argmax(batch_rayleigh(kernel, weight, p, X)[0])], rng)
    dt = 1.0 / max(L, 1e-300)
    best = (np.inf, X, None)
    R, G, res = batch_rayleigh(kernel, weight, p, X)
    it = 0
    last_best = 0
    for it in range(1, config.max_iter + 1):
        c = int(np.argmax(R))
        if res[c] < max(config.tol_residual, _POLISH_AT):
            return X, R, res[c], it - 1, res[c] < config.tol_residual
        if res[c] < best[0]:
            best = (res[c], X, R)
            last_best = it
        elif it - last_best > _STALL:
            log.info("climbing refinement stalled at residual %.3e", best[0])
            return best[1], best[2], best[0], it, False
        T = _tangents(X)
        along = np.sum(G * T, axis=1, keepdims=True)
        D = -(G - along * T)
        D[c] = -(G[c] - 2.0 * along[c] * T[c])
        step = dt
        while True:
            Y = _normalize_rows(X + step * D, weight, p)
            if Y is not None:
                break
            step *= 0.5
            if step < 1e-12 * dt:
                log.warning("climbing refinement: step underflow")
                return best[1], best[2], best[0], it, False
        X = redistribute(Y, weight, p, fixed=(0, c))
        R, G, res = batch_rayleigh(kernel, weight, p, X)
        if it % _REFINE_CHECK == 0 and res[int(np.argmax(R))] > 10 * best[0]:
            dt *= 0.5
            X, R = best[1], best[2]
            R, G, res = batch_rayleigh(kernel, weight, p, X)
    c = int(np.argmax(R))
    if res[c] < best[0]:
        best = (res[c], X, R)
    return best[1], best[2], best[0], it, bool(best[0] < config.tol_residual)


def _polish(kernel, weight, p, u, tol):
    # Root-find the eigen-equation at the climbing point. Returns the
    # polished point or None when LM does not reach ``tol``.
    scale = np.linalg.norm(gagliardo_gradient(kernel, p, u))

    def equations(v):
        lam = rayleigh_quotient(kernel, weight, p, v)
        if not np.isfinite(lam):
            return np.full(v.size + 1, 1e6)
        r = gagliardo_gradient(kernel, p, v) - lam * weighted_lp_gradient(weight, p, v)
        return np.append(r / scale, weighted_lp_energy(weight, p, v) - 1.0)

    # LM is fastest when it works; near plateaus (p < 2, neighbouring values
    # almost equal) the Jacobian is nearly singular and trf is more robust.
    for method, budget in (("lm", 50), ("trf", 100)):
        sol = least_squares(equations, u, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=budget * (u.size + 1))
        v = try_normalize(sol.x, weight, p)
        if v is None:
            continue
        lam = rayleigh_quotient(kernel, weight, p, v)
        if residual_norm(kernel, weight, p, lam, v) < tol:
            return v
    return None


def solve_lambda2_path(
    kernel: FractionalKernel,
    weight: WeightField,
    p: float,
    e1: np.ndarray,
    config: SolverConfig | None = None,
):
    """Estimate the second eigenvalue by optimizing an odd loop through ``+-e1``.

    Returns ``(estimate, path)``, where ``estimate`` is the maximum of
    ``Phi`` over the stored path points.
    """
    config = config or SolverConfig()
    if abs(weighted_lp_energy(weight, p, e1) - 1.0) > 1e-8:
        raise ValueError("e1 must lie on the weighted sphere")
    rng = np.random.default_rng(config.seed)
    X = initial_path(kernel, weight, p, e1, config.path_points, rng)
    total = 0
    for temp in config.lse_temperatures:
        R = batch_rayleigh(kernel, weight, p, X)[0]
        X, n_it = _lse_stage(kernel, weight, p, X, temp * config.path_points, float(R.max()), config)
        total += n_it
        if config.verbose:
            log.info("lambda2 lse stage T=%g: max R = %.12g after %d iterations",
                     temp, batch_rayleigh(kernel, weight, p, X)[0].max(), n_it)
    X, R, resid, n_it, converged = _climbing_refine(kernel, weight, p, X, config, rng)
    total += n_it
    if not converged:
        c = int(np.argmax(R))
        v = _polish(kernel, weight, p, X[c], config.tol_residual)
        # LM may wander to a different critical point; the critical value is
        # a better witness of that than the distance, since near-zero tails
        # can move a lot without changing R.
        if v is not None:
            lam = rayleigh_quotient(kernel, weight, p, v)
            if nodal_check(v) and abs(lam - R[c]) <= _POLISH_GATE * R[c]:
                X = X.copy()
                X[c] = v
                resid, converged = residual_norm(kernel, weight, p, lam, v), True
            else:
                log.warning("lambda2 polish rejected: R = %.10g at the loop top, %.10g after", R[c], lam)
    energies = np.array([gagliardo_energy(kernel, p, x) for x in X])
    path = SymmetricPath(points=X, energies=energies, iterations=total, converged=converged, residual=float(resid))
    if not converged:
        log.warning("lambda2 path did not converge: climbing residual %.3e", resid)
    return float(energies.max()), path


def _omega_grid(samples: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def nodal_path(weight: WeightField, p: float, u_nodal, omegas: np.ndarray) -> np.ndarray:
    """Points ``(w1 u+ - w2 u-) / K(w)`` of the odd loop built from a nodal function."""
    u = np.asarray(u_nodal, dtype=float)
    up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
    a, b = weighted_lp_energy(weight, p, up), weighted_lp_energy(weight, p, um)
    if not (np.any(up > 0) and np.any(um > 0)):
        raise ValueError("u_nodal must take both signs")
    if not (a > 0 and b > 0):
        raise ValueError(
            f"both parts of u_nodal need positive weighted mass; got {a!r} and {b!r}"
        )
    K = (np.abs(omegas[:, 0]) ** p * a + np.abs(omegas[:, 1]) ** p * b) ** (1.0 / p)
    return (omegas[:, :1] * up - omegas[:, 1:] * um) / K[:, None]


def lambda2_upper_from_nodal(
    kernel: FractionalKernel,
    weight: WeightField,
    p: float,
    u_nodal,
    omega_samples: int = 1024,
) -> float:
    """Maximum of ``Phi`` along the odd loop spanned by the two signed parts of ``u_nodal``."""
    F = nodal_path(weight, p, u_nodal, _omega_grid(omega_samples))
    return float(max(gagliardo_energy(kernel, p, f) for f in F))


def nodal_check(u: np.ndarray, rel: float = 1e-8) -> bool:
    """True when ``u`` has entries of both signs above ``rel * max|u|``."""
    u = fix_sign(np.asarray(u))
    tol = rel * np.max(np.abs(u))
    return bool(u.max() > tol and u.min() < -tol)
