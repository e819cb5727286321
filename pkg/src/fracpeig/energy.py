"""Energy functionals on grid functions and the sign-indefinite weight.

Grid functions are plain 1-D float arrays with one value per interior cell,
in the domain's enumeration order.

``gagliardo_energy`` is the p-th power of the seminorm (``Phi``);
``weighted_lp_energy`` is ``int m |u|^p`` (``Psi_m``). The pair sum runs over
ordered pairs, so every unordered pair is counted twice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import Domain
from .kernel import FractionalKernel


def _signed_power(x: np.ndarray, q: float) -> np.ndarray:
    # |x|^q sign(x); equals 0 at x = 0 for any q > 0.
    return np.sign(x) * np.abs(x) ** q


def _as_grid_function(u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.shape[0] != n:
        raise ValueError(f"grid function has shape {u.shape}, expected ({n},)")
    return u


@dataclass(frozen=True, eq=False)
class WeightField:
    """Per-cell values of the weight ``m``.

    Construction enforces the discrete analogue of the admissible class:
    finite values and a positive mass on the cells where ``m > 0``.
    """

    values: np.ndarray = field(repr=False)
    cell_volume: float
    description: str = "custom"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("weight values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("weight values must be finite")
        if not self.cell_volume > 0:
            raise ValueError("cell volume must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.positive_mass > 0:
            raise ValueError("weight must be positive on a set of positive measure (positive mass is 0)")

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def positive_mass(self) -> float:
        v = self.values
        return float(np.sum(v[v > 0]) * self.cell_volume)

    def scaled(self, t: float) -> "WeightField":
        return WeightField(t * self.values, self.cell_volume, f"{t!r}*({self.description})")

    def positive_part(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, domain: Domain, value: float = 1.0) -> "WeightField":
        return cls(np.full(domain.n_cells, float(value)), domain.cell_volume, f"constant({value!r})")

    @classmethod
    def step(
        cls,
        domain: Domain,
        threshold: float = 0.5,
        left: float = 1.0,
        right: float = -1.0,
        axis: int = 0,
    ) -> "WeightField":
        """``left`` where the center coordinate along ``axis`` is below ``threshold``, else ``right``."""
        x = domain.cell_centers[:, axis]
        values = np.where(x < threshold, float(left), float(right))
        return cls(values, domain.cell_volume, f"step({threshold!r},{left!r},{right!r},axis={axis})")

    @classmethod
    def singular(
        cls,
        domain: Domain,
        s: float,
        p: float,
        alpha: float,
        coeff: float = 1.0,
        offset: float = 0.0,
        center=None,
        samples: int = 8,
    ) -> "WeightField":
        """``coeff * |x - center|^-alpha + offset``, averaged over each cell.

        Requires ``alpha < p*s`` so that the continuum weight lies in
        ``L^{N/(ps)}``. Cell averages use ``samples`` midpoints per axis,
        which never coincide with a cell center.
        """
        if not alpha < p * s:
            raise ValueError(
                f"singular weight violates the L^(N/ps) integrability guard: "
                f"need alpha < p*s, got alpha = {alpha}, p*s = {p * s}"
            )
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        center = 0.5 * (domain.box_lo + domain.box_hi) if center is None else np.asarray(center, float)
        h, dim = domain.h, domain.dim
        sub = ((np.arange(samples) + 0.5) / samples - 0.5) * h
        offsets = np.stack(np.meshgrid(*([sub] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        pts = domain.cell_centers[:, None, :] + offsets[None, :, :]
        r = np.linalg.norm(pts - center, axis=-1)
        values = coeff * np.mean(r ** (-alpha), axis=1) + offset
        return cls(values, domain.cell_volume, f"singular(alpha={alpha!r},coeff={coeff!r},offset={offset!r})")

    @classmethod
    def from_csv(cls, domain: Domain, path) -> "WeightField":
        """Read one value per interior cell (last column of each row; header optional)."""
        values = []
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
        for k, row in enumerate(rows):
            try:
                values.append(float(row[-1]))
            except ValueError:
                if k > 0:
                    raise ValueError(f"{path}: row {k + 1} is not numeric: {row!r}") from None
        if len(values) != domain.n_cells:
            raise ValueError(f"weight file has {len(values)} values, grid has {domain.n_cells} cells")
        return cls(np.asarray(values), domain.cell_volume, f"csv({path})")


def gagliardo_energy(kernel: FractionalKernel, p: float, u) -> float:
    u = _as_grid_function(u, kernel.n_cells)
    D = np.abs(u[:, None] - u[None, :])
    pair = np.sum(kernel.pair_weights * D**p)
    tail = kernel.cell_volume * np.dot(kernel.exterior_coeff, np.abs(u) ** p)
    return float(pair + tail)


def gagliardo_gradient(kernel: FractionalKernel, p: float, u) -> np.ndarray:
    if not p > 1:
        raise ValueError("gradient needs p > 1")
    u = _as_grid_function(u, kernel.n_cells)
    D = u[:, None] - u[None, :]
    pair = 2.0 * p * np.sum(kernel.pair_weights * _signed_power(D, p - 1.0), axis=1)
    tail = p * kernel.cell_volume * kernel.exterior_coeff * _signed_power(u, p - 1.0)
    return pair + tail


def weighted_lp_energy(weight: WeightField, p: float, u) -> float:
    u = _as_grid_function(u, weight.n_cells)
    return float(weight.cell_volume * np.dot(weight.values, np.abs(u) ** p))


def weighted_lp_gradient(weight: WeightField, p: float, u) -> np.ndarray:
    if not p > 1:
        raise ValueError("gradient needs p > 1")
    u = _as_grid_function(u, weight.n_cells)
    return p * weight.cell_volume * weight.values * _signed_power(u, p - 1.0)


def residual_norm(kernel: FractionalKernel, weight: WeightField, p: float, lam: float, u) -> float:
    """Relative Euclidean residual of ``Phi'(u) = lam * Psi_m'(u)``."""
    u = _as_grid_function(u, kernel.n_cells)
    if not np.any(u):
        raise ValueError("residual is undefined at u = 0")
    g = gagliardo_gradient(kernel, p, u)
    r = g - lam * weighted_lp_gradient(weight, p, u)
    return float(np.linalg.norm(r) / np.linalg.norm(g))


def rayleigh_quotient(kernel: FractionalKernel, weight: WeightField, p: float, u) -> float:
    """``Phi(u) / Psi_m(u)``; ``inf`` when ``Psi_m(u) <= 0``."""
    psi = weighted_lp_energy(weight, p, u)
    if psi <= 0:
        return np.inf
    return gagliardo_energy(kernel, p, u) / psi


def batch_rayleigh(kernel: FractionalKernel, weight: WeightField, p: float, X, chunk_elems: int = 4_000_000):
    """Rayleigh quotients, their gradients and relative residuals for the rows of ``X``.

    Rows with ``Psi_m <= 0`` get ``R = inf`` and a zero gradient.
    """
    X = np.asarray(X, dtype=float)
    K, n = X.shape
    if n != kernel.n_cells or n != weight.n_cells:
        raise ValueError(f"path rows have {n} cells, expected {kernel.n_cells}")
    vol = kernel.cell_volume
    W, tail, m = kernel.pair_weights, kernel.exterior_coeff, weight.values
    phi = np.empty(K)
    dphi = np.empty_like(X)
    step = max(1, chunk_elems // (n * n))
    for start in range(0, K, step):
        Y = X[start:start + step]
        D = Y[:, :, None] - Y[:, None, :]
        A = np.abs(D)
        Q = A if p == 2 else A ** (p - 1.0)
        phi[start:start + step] = np.einsum("ij,kij->k", W, Q * A)
        dphi[start:start + step] = 2.0 * p * np.einsum("ij,kij->ki", W, np.copysign(Q, D))
    Qu = np.abs(X) ** (p - 1.0)
    Pu = Qu * np.abs(X)
    su = np.copysign(Qu, X)
    phi += vol * Pu @ tail
    dphi += p * vol * tail * su
    psi = vol * Pu @ m
    dpsi = p * vol * m * su

    ok = psi > 0
    R = np.full(K, np.inf)
    R[ok] = phi[ok] / psi[ok]
    resid = dphi - np.where(ok, R, 0.0)[:, None] * dpsi
    G = np.where(ok[:, None], resid / np.where(ok, psi, 1.0)[:, None], 0.0)
    nd = np.linalg.norm(dphi, axis=1)
    res = np.full(K, np.inf)
    good = ok & (nd > 0)
    res[good] = np.linalg.norm(resid[good], axis=1) / nd[good]
    return R, G, res


def gagliardo_energy_rows(kernel: FractionalKernel, p: float, X, chunk_elems: int = 4_000_000) -> np.ndarray:
    """``Phi`` of every row of ``X`` (shape ``(K, n)``)."""
    X = np.asarray(X, dtype=float)
    K, n = X.shape
    if n != kernel.n_cells:
        raise ValueError(f"rows have {n} cells, expected {kernel.n_cells}")
    out = np.empty(K)
    step = max(1, chunk_elems // (n * n))
    for start in range(0, K, step):
        Y = X[start:start + step]
        D = np.abs(Y[:, :, None] - Y[:, None, :]) ** p
        out[start:start + step] = np.einsum("ij,kij->k", kernel.pair_weights, D)
    return out + kernel.cell_volume * (np.abs(X) ** p) @ kernel.exterior_coeff
