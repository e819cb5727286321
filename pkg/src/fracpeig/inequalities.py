"""Elementary and functional inequalities as nonnegative gaps.

Every ``*_gap`` function is oriented so that the inequality holds iff the
returned gap is >= 0. The scalar functions return a :class:`GapResult`;
the ``*_gaps`` variants take arrays and broadcast, which is what the
randomized sweeps use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .energy import WeightField, gagliardo_energy, gagliardo_energy_rows, weighted_lp_energy
from .grid import DomainSpec, build_grid
from .kernel import FractionalKernel, assemble_kernel

log = logging.getLogger(__name__)

SWEEP_TOL = -1e-10


@dataclass(frozen=True)
class GapResult:
    gap: float
    inputs_digest: str

    def __post_init__(self):
        if not np.isfinite(self.gap):
            raise ValueError(f"gap is not finite for {self.inputs_digest}")

    @property
    def holds(self) -> bool:
        return self.gap >= 0


def _fmt(**kw) -> str:
    parts = []
    for k, v in kw.items():
        if isinstance(v, np.ndarray):
            v = np.array2string(v, precision=17, separator=",", max_line_width=10**6)
        else:
            v = repr(float(v)) if np.isscalar(v) else repr(v)
        parts.append(f"{k}={v}")
    return "; ".join(parts)


def _spow(x, q):
    # |x|^q sign(x)
    return np.sign(x) * np.abs(x) ** q


# -- scalar pair inequalities -------------------------------------------------

def convexity_gaps(a, b, p):
    a, b, p = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, p)))
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("convexity gap needs a, b >= 0")
    return 2.0 ** (p - 1.0) * (a + b) ** p - a**p - b**p


def convexity_gap(a: float, b: float, p: float) -> GapResult:
    """``2^(p-1) (a+b)^p - a^p - b^p``."""
    return GapResult(float(convexity_gaps(a, b, p)), _fmt(a=a, b=b, p=p))


def lagrange_gaps(a, b, q):
    a, b, q = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, q)))
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("lagrange gap needs a, b >= 0")
    if np.any(((a == 0) | (b == 0)) & (q < 1)):
        raise ValueError("lagrange gap needs a, b > 0 when q < 1")
    with np.errstate(divide="ignore"):
        big = np.maximum(a ** (q - 1.0), b ** (q - 1.0))
    return q * big * np.abs(a - b) - np.abs(a**q - b**q)


def lagrange_gap(a: float, b: float, q: float) -> GapResult:
    """``q max(a^(q-1), b^(q-1)) |a-b| - |a^q - b^q|``."""
    return GapResult(float(lagrange_gaps(a, b, q)), _fmt(a=a, b=b, q=q))


def picone_gaps(ax, ay, bx, by, p, eps):
    ax, ay, bx, by, p, eps = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (ax, ay, bx, by, p, eps))
    )
    if np.any(ax < 0) or np.any(ay < 0) or np.any(bx < 0) or np.any(by < 0):
        raise ValueError("picone gap needs nonnegative arguments")
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    wx = ax**p / (bx + eps) ** (p - 1.0)
    wy = ay**p / (by + eps) ** (p - 1.0)
    return np.abs(ax - ay) ** p - _spow(bx - by, p - 1.0) * (wx - wy)


def picone_gap(ax: float, ay: float, bx: float, by: float, p: float, eps: float) -> GapResult:
    """Discrete Picone: ``|v(x)-v(y)|^p >= |u(x)-u(y)|^(p-2) (u(x)-u(y)) (w(x)-w(y))``.

    ``a*`` are the values of ``v``, ``b*`` the values of ``u`` and
    ``w = v^p / (u + eps)^(p-1)``.
    """
    g = picone_gaps(ax, ay, bx, by, p, eps)
    return GapResult(float(g), _fmt(ax=ax, ay=ay, bx=bx, by=by, p=p, eps=eps))


def _check_circle(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] != 2:
        raise ValueError("omega must be a pair")
    if np.any(np.abs(np.sum(omega**2, axis=-1) - 1.0) > 1e-12):
        raise ValueError("omega must lie on the unit circle")
    return omega


def scd5_gaps(U, V, omega, p):
    omega = _check_circle(omega)
    w1, w2 = omega[..., 0], omega[..., 1]
    U, V = np.asarray(U, dtype=float), np.asarray(V, dtype=float)
    lhs = _spow(w1 * U - w1 * V, p - 1.0) * w1 * U - _spow(w2 * U - w2 * V, p - 1.0) * w2 * V
    return lhs - np.abs(w1 * U - w2 * V) ** p


def scd5_gap(U: float, V: float, omega, p: float) -> GapResult:
    """Gap of the pointwise inequality behind the odd-loop construction.

    Meaningful for ``U = u+(x) - u+(y)``, ``V = u-(x) - u-(y)``; see
    :func:`scd5_from_values`.
    """
    return GapResult(float(scd5_gaps(U, V, omega, p)), _fmt(U=U, V=V, omega=tuple(float(x) for x in np.ravel(omega)), p=p))


def positive_negative_differences(ux, uy):
    """``(U, V)`` built from the positive and negative parts of two values."""
    ux, uy = np.asarray(ux, dtype=float), np.asarray(uy, dtype=float)
    U = np.maximum(ux, 0) - np.maximum(uy, 0)
    V = np.maximum(-ux, 0) - np.maximum(-uy, 0)
    return U, V


def scd5_from_values(ux: float, uy: float, omega, p: float) -> GapResult:
    U, V = positive_negative_differences(ux, uy)
    g = scd5_gaps(U, V, omega, p)
    return GapResult(float(g), _fmt(ux=ux, uy=uy, omega=tuple(float(x) for x in np.ravel(omega)), p=p))


# -- functional inequalities ---------------------------------------------------

def _nonneg_weight(weight) -> WeightField:
    if not isinstance(weight, WeightField):
        raise TypeError("expected a WeightField")
    if np.any(weight.values < 0):
        raise ValueError("clarkson gap needs a nonnegative weight (pass the positive part)")
    return weight


def clarkson_gap(u, v, p: float, weight_positive_part: WeightField) -> GapResult:
    """Clarkson's inequalities in the ``L^p`` space weighted by ``m+``.

    For ``p >= 2`` the first inequality,
    ``Psi((u+v)/2) + Psi((u-v)/2) <= (Psi(u) + Psi(v)) / 2``; for ``1 < p < 2``
    the second one in norm form,
    ``|(u+v)/2|^p' + |(u-v)/2|^p' <= (|u|^p/2 + |v|^p/2)^(p'-1)``.
    """
    w = _nonneg_weight(weight_positive_part)
    if not p > 1:
        raise ValueError("clarkson gap needs p > 1")
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)

    def psi(z):
        return weighted_lp_energy(w, p, z)

    plus, minus = 0.5 * (u + v), 0.5 * (u - v)
    if p >= 2:
        gap = 0.5 * (psi(u) + psi(v)) - psi(plus) - psi(minus)
    else:
        q = p / (p - 1.0)
        gap = (0.5 * psi(u) + 0.5 * psi(v)) ** (q - 1.0) - psi(plus) ** (q / p) - psi(minus) ** (q / p)
    return GapResult(float(gap), _fmt(u=u, v=v, p=p))


def hidden_convexity_path(u, v, p: float, t: float) -> np.ndarray:
    """``w_t = ((1-t) u^p + t v^p)^(1/p)`` for positive ``u``, ``v``."""
    return ((1.0 - t) * np.asarray(u, float) ** p + t * np.asarray(v, float) ** p) ** (1.0 / p)


def _check_hidden(u, v, t):
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if np.any(u <= 0) or np.any(v <= 0):
        raise ValueError("hidden convexity needs strictly positive u and v")
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > 1):
        raise ValueError("t must lie in [0, 1]")
    return u, v


def hidden_convexity_gap(kernel: FractionalKernel, p: float, u, v, t: float) -> GapResult:
    """``(1-t) Phi(u) + t Phi(v) - Phi(w_t)``."""
    u, v = _check_hidden(u, v, t)
    w = hidden_convexity_path(u, v, p, t)
    gap = (1.0 - t) * gagliardo_energy(kernel, p, u) + t * gagliardo_energy(kernel, p, v) - gagliardo_energy(kernel, p, w)
    return GapResult(float(gap), _fmt(u=u, v=v, p=p, t=t))


def hidden_convexity_gaps(kernel: FractionalKernel, p: float, U, V, t: float) -> np.ndarray:
    U, V = _check_hidden(U, V, t)
    W = hidden_convexity_path(U, V, p, t)
    rows = lambda X: gagliardo_energy_rows(kernel, p, X)  # noqa: E731
    return (1.0 - t) * rows(U) + t * rows(V) - rows(W)


def abs_contraction_gap(kernel: FractionalKernel, p: float, u) -> GapResult:
    """``Phi(u) - Phi(|u|)``."""
    u = np.asarray(u, dtype=float)
    gap = gagliardo_energy(kernel, p, u) - gagliardo_energy(kernel, p, np.abs(u))
    return GapResult(float(gap), _fmt(u=u, p=p))


# -- sweeps --------------------------------------------------------------------

@dataclass
class SweepOutcome:
    name: str
    samples: int
    worst_gap: float
    worst_inputs: str
    seed: int
    tol: float = SWEEP_TOL

    @property
    def passed(self) -> bool:
        return bool(self.worst_gap >= self.tol)

    def row(self) -> dict:
        return {
            "suite": self.name,
            "samples": self.samples,
            "worst_gap": self.worst_gap,
            "passed": self.passed,
            "seed": self.seed,
            "worst_inputs": self.worst_inputs,
        }


def _worst(name, gaps, seed, describe):
    gaps = np.asarray(gaps, dtype=float)
    if not np.all(np.isfinite(gaps)):
        k = int(np.argmax(~np.isfinite(gaps)))
        return SweepOutcome(name, gaps.size, -np.inf, describe(k), seed)
    k = int(np.argmin(gaps))
    return SweepOutcome(name, gaps.size, float(gaps[k]), describe(k), seed)


def sweep_convexity(rng, n):
    a, b = rng.uniform(0, 10, n), rng.uniform(0, 10, n)
    p = 5.0 - rng.uniform(0, 4, n)  # (1, 5]
    g = convexity_gaps(a, b, p)
    return g, lambda k: _fmt(a=a[k], b=b[k], p=p[k])


def sweep_lagrange(rng, n):
    a, b = rng.uniform(1e-3, 10, n), rng.uniform(1e-3, 10, n)
    q = 4.0 - rng.uniform(0, 4, n)  # (0, 4]
    g = lagrange_gaps(a, b, q)
    return g, lambda k: _fmt(a=a[k], b=b[k], q=q[k])


def sweep_picone(rng, n, ps=(1.5, 2.0, 3.0)):
    p = rng.choice(ps, n)
    ax, ay, bx, by = (rng.uniform(0, 2, n) for _ in range(4))
    eps = 10.0 ** rng.uniform(-3, 0, n)
    g = picone_gaps(ax, ay, bx, by, p, eps)
    return g, lambda k: _fmt(ax=ax[k], ay=ay[k], bx=bx[k], by=by[k], p=p[k], eps=eps[k])


def sweep_scd5(rng, n, ps=(1.5, 2.0, 3.0)):
    p = rng.choice(ps, n)
    ux, uy = rng.uniform(-2, 2, n), rng.uniform(-2, 2, n)
    theta = rng.uniform(0, 2 * np.pi, n)
    omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    U, V = positive_negative_differences(ux, uy)
    g = scd5_gaps(U, V, omega, p)
    return g, lambda k: _fmt(ux=ux[k], uy=uy[k], theta=theta[k], p=p[k])


def sweep_clarkson(rng, n, ps=(1.5, 2.0, 3.0, 4.0), cells=8):
    gaps = np.empty(n)
    record = []
    for k in range(n):
        p = float(ps[k % len(ps)])
        w = WeightField(rng.uniform(0, 2, cells) + 1e-3, 1.0 / cells, "random")
        u, v = rng.standard_normal(cells), rng.standard_normal(cells)
        gaps[k] = clarkson_gap(u, v, p, w).gap
        record.append((u, v, p))
    return gaps, lambda k: _fmt(u=record[k][0], v=record[k][1], p=record[k][2])


def _small_kernel(p, cells=8, s=0.3):
    return assemble_kernel(build_grid(DomainSpec.interval(0.0, 1.0, cells)), s, p)


def sweep_hidden_convexity(rng, n, ps=(1.5, 2.0, 3.0), ts=(0.25, 0.5, 0.75), cells=8):
    groups = [(p, t) for p in ps for t in ts]
    per = -(-n // len(groups))
    gaps, meta = [], []
    for p, t in groups:
        kern = _small_kernel(p, cells)
        U = rng.uniform(0.01, 2, (per, cells))
        V = rng.uniform(0.01, 2, (per, cells))
        gaps.append(hidden_convexity_gaps(kern, p, U, V, t))
        meta.extend((U[i], V[i], p, t) for i in range(per))
    return np.concatenate(gaps), lambda k: _fmt(u=meta[k][0], v=meta[k][1], p=meta[k][2], t=meta[k][3])


def sweep_abs_contraction(rng, n, ps=(1.5, 2.0, 3.0), cells=8):
    per = -(-n // len(ps))
    gaps, meta = [], []
    for p in ps:
        kern = _small_kernel(p, cells)
        X = rng.standard_normal((per, cells))
        gaps.append(gagliardo_energy_rows(kern, p, X) - gagliardo_energy_rows(kern, p, np.abs(X)))
        meta.extend((X[i], p) for i in range(per))
    return np.concatenate(gaps), lambda k: _fmt(u=meta[k][0], p=meta[k][1])


SWEEPS = {
    "convexity": (sweep_convexity, 100_000),
    "lagrange": (sweep_lagrange, 100_000),
    "clarkson": (sweep_clarkson, 10_000),
    "hidden_convexity": (sweep_hidden_convexity, 10_000),
    "picone": (sweep_picone, 100_000),
    "scd5": (sweep_scd5, 100_000),
    "abs_contraction": (sweep_abs_contraction, 10_000),
}


def run_sweep(name: str, seed: int = 0, samples: int | None = None) -> SweepOutcome:
    fn, default = SWEEPS[name]
    # each suite gets its own stream so adding a suite does not shift the others
    rng = np.random.default_rng([seed, list(SWEEPS).index(name)])
    gaps, describe = fn(rng, samples or default)
    out = _worst(name, gaps, seed, describe)
    log.info("sweep %s: %d samples, worst gap %.3e", name, out.samples, out.worst_gap)
    return out


def run_all_sweeps(seed: int = 0, samples: int | None = None) -> list[SweepOutcome]:
    return [run_sweep(name, seed, samples) for name in SWEEPS]
