"""Projected descent with Armijo backtracking.

The search direction comes from a limited-memory BFGS two-loop recursion
(falling back to steepest descent whenever it is not a descent direction).
Every trial point is mapped back to the constraint set by ``retract``;
infeasible trials (``retract`` returns ``None``) count as rejected and the
step is halved.

Near convergence the objective decrease drops below rounding. A step is
then also accepted under the approximate Wolfe test: objective no larger
than ``f + 1e-14 |f|`` and directional derivative reduced.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

_APPROX_EPS = 1e-14
_C1 = 1e-4
_MAX_BACKTRACK = 60


@dataclass
class DescentResult:
    x: np.ndarray
    f: float
    iterations: int
    converged: bool
    status: str


def projected_descent(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    retract: Callable[[np.ndarray], np.ndarray | None],
    is_converged: Callable[[np.ndarray, float, np.ndarray], bool],
    *,
    max_iter: int,
    step_init: float = 1.0,
    backtrack: float = 0.5,
    memory: int = 12,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> DescentResult:
    """Minimize ``fun`` over the set parametrized by ``retract``.

    ``fun`` returns the objective and its gradient. ``x0`` must already be
    feasible.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f):
        raise ValueError("initial point is infeasible")
    history: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=memory)
    stalls = 0
    for it in range(max_iter):
        if is_converged(x, f, g):
            return DescentResult(x, f, it, True, "converged")
        if callback is not None:
            callback(it, x, f)

        d = _two_loop(g, history)
        slope = float(np.vdot(g, d))
        if not slope < 0 or not np.isfinite(slope):
            history.clear()
            d = -g
            slope = -float(np.vdot(g, g))
        if history:
            t = 1.0
        else:
            gnorm = np.linalg.norm(g)
            if gnorm == 0:
                return DescentResult(x, f, it, False, "zero gradient")
            t = step_init * np.linalg.norm(x) / gnorm

        accepted = False
        for _ in range(_MAX_BACKTRACK):
            x_new = retract(x + t * d)
            if x_new is not None:
                f_new, g_new = fun(x_new)
                if np.isfinite(f_new):
                    if f_new <= f + _C1 * t * slope:
                        accepted = True
                        break
                    if f_new <= f + _APPROX_EPS * abs(f) and np.vdot(g_new, d) >= 0.9 * slope:
                        accepted = True
                        break
            t *= backtrack
        if not accepted:
            if history:
                history.clear()
                stalls += 1
                if stalls > 3:
                    return DescentResult(x, f, it, False, "line search failed")
                continue
            return DescentResult(x, f, it, False, "line search failed")

        stalls = 0
        s_vec = (x_new - x).ravel()
        y_vec = (g_new - g).ravel()
        sy = float(np.dot(s_vec, y_vec))
        if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            history.append((s_vec, y_vec, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
    converged = is_converged(x, f, g)
    return DescentResult(x, f, max_iter, converged, "converged" if converged else "max_iter")


def _two_loop(g: np.ndarray, history) -> np.ndarray:
    q = g.ravel().copy()
    if not history:
        return -g
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y, _ = history[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q.reshape(g.shape)
