"""Discrete Gagliardo seminorm for piecewise-constant functions.

For cells ``i != j`` the pair weight approximates

    w_ij = int_{cell_i} int_{cell_j} |x - y|^-(N + p s) dy dx

and the exterior coefficient approximates

    k_i = 2 int_{complement of the domain} |x_i - y|^-(N + p s) dy

so that the seminorm of a zero-extended grid function ``u`` is

    sum_{i != j} w_ij |u_i - u_j|^p + h^N sum_i k_i |u_i|^p.

Far pairs (center distance > 2h) use the midpoint rule. Near pairs use
exact self-similarity of the kernel: splitting two cubes at lattice offset
``k`` into halves produces child pairs at offsets ``2k + b - a``, and the
near ones among them are the same unknowns rescaled by ``2^(N+ps-2N)``.
The resulting small linear system is solved once per exponent; only the
far children need a (smooth) quadrature.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Domain

NEAR_RADIUS = 2.0
TAIL_RADIUS_FACTOR = 4.0


@dataclass(frozen=True, eq=False)
class FractionalKernel:
    s: float
    p: float
    dim: int
    exponent: float
    cell_volume: float
    pair_weights: np.ndarray = field(repr=False)
    exterior_coeff: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.exterior_coeff.shape[0]

    def stiffness_matrix(self) -> np.ndarray:
        """Matrix ``A`` with ``u @ A @ u`` equal to the p = 2 energy."""
        W = self.pair_weights
        A = -2.0 * W
        A[np.diag_indices_from(A)] = 2.0 * W.sum(axis=1) + self.cell_volume * self.exterior_coeff
        return A

    def to_csv(self, path) -> None:
        """Dump pair weights (one row per cell) followed by a row of exterior coefficients."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"cell_{j}" for j in range(self.n_cells)])
            for row in self.pair_weights:
                writer.writerow([repr(float(v)) for v in row])
            writer.writerow([repr(float(v)) for v in self.exterior_coeff])


def check_parameters(dim: int, s: float, p: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional order s must lie in (0, 1), got {s}")
    if not p > 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    if not p * s < dim:
        raise ValueError(f"need p*s < N; got p*s = {p * s} with N = {dim}")
    # Piecewise constants have finite seminorm only when p*s < 1; beyond
    # that the adjacent-cell integral diverges.
    if not p * s < 1.0:
        raise ValueError(
            f"non-finite quadrature: adjacent-cell integral diverges for p*s >= 1 "
            f"(got p*s = {p * s}); use a smaller s"
        )


def _gauss_tent(dim: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    z = np.concatenate([(x - 1.0) / 2.0, (x + 1.0) / 2.0])
    wz = np.concatenate([w, w]) / 2.0 * (1.0 - np.abs(z))
    Z = np.stack(np.meshgrid(*([z] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    Wz = np.prod(np.stack(np.meshgrid(*([wz] * dim), indexing="ij"), axis=-1).reshape(-1, dim), axis=1)
    return Z, Wz


def _far_pair_integral(offset, exponent: float, dim: int, order: int = 8) -> float:
    # Double integral over two unit cubes = integral of the kernel against
    # the tent function (autocorrelation of the cube indicator).
    Z, W = _gauss_tent(dim, order)
    r = np.linalg.norm(np.asarray(offset, dtype=float) + Z, axis=1)
    return float(np.sum(W * r ** (-exponent)))


@lru_cache(maxsize=64)
def near_pair_integrals(dim: int, exponent: float) -> dict[tuple[int, ...], float]:
    """Pair integrals of ``|x-y|^-exponent`` over unit cubes at near lattice offsets.

    Keys are nonzero offsets with Euclidean length <= 2. Scale to spacing
    ``h`` by multiplying with ``h^(2 dim - exponent)``.
    """
    if not exponent < dim + 1.0:
        raise ValueError("adjacent-cell integral diverges for exponent >= dim + 1")
    rng = range(-3, 4)
    near = [k for k in itertools.product(rng, repeat=dim) if any(k) and np.hypot.reduce(k) <= NEAR_RADIUS]
    pos = {k: i for i, k in enumerate(near)}
    c = 2.0 ** (exponent - 2 * dim)
    T = np.zeros((len(near), len(near)))
    rhs = np.zeros(len(near))
    corners = list(itertools.product((0, 1), repeat=dim))
    for k in near:
        for a in corners:
            for b in corners:
                j = tuple(2 * ki + bi - ai for ki, ai, bi in zip(k, a, b))
                if j in pos:
                    T[pos[k], pos[j]] += c
                else:
                    rhs[pos[k]] += c * _far_pair_integral(j, exponent, dim)
    values = np.linalg.solve(np.eye(len(near)) - T, rhs)
    return {k: float(v) for k, v in zip(near, values)}


def _point_cell_integral(offset, exponent: float, dim: int, order: int = 6, split: int = 4) -> float:
    # Integral of |y|^-exponent over the unit cube centered at `offset`
    # (offset != 0), by subdivided tensor Gauss-Legendre.
    x, w = np.polynomial.legendre.leggauss(order)
    sub = (np.arange(split) + 0.5) / split - 0.5
    nodes = (sub[:, None] + x[None, :] / (2 * split)).ravel()
    weights = np.tile(w / (2 * split), split)
    Y = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    Wy = np.prod(np.stack(np.meshgrid(*([weights] * dim), indexing="ij"), axis=-1).reshape(-1, dim), axis=1)
    r = np.linalg.norm(np.asarray(offset, dtype=float) + Y, axis=1)
    return float(np.sum(Wy * r ** (-exponent)))


@lru_cache(maxsize=64)
def _near_point_integrals(dim: int, exponent: float) -> dict[tuple[int, ...], float]:
    rng = range(-2, 3)
    return {
        k: _point_cell_integral(k, exponent, dim)
        for k in itertools.product(rng, repeat=dim)
        if any(k) and np.hypot.reduce(k) <= NEAR_RADIUS
    }


def radial_tail(ps: float, radius: float) -> float:
    """``2 * int_{|y| > radius} |y|^-(2 + ps) dy`` in the plane."""
    return 2.0 * (2.0 * np.pi / ps) * radius ** (-ps)


def _point_cell_weights(offsets: np.ndarray, h: float, exponent: float, dim: int) -> np.ndarray:
    # h^N-scaled integral of the kernel over the cell at integer `offsets`
    # as seen from the origin cell's center.
    r = np.linalg.norm(offsets, axis=-1)
    out = np.zeros(r.shape)
    far = r > NEAR_RADIUS
    out[far] = r[far] ** (-exponent)
    near = _near_point_integrals(dim, exponent)
    for idx in zip(*np.nonzero(~far & (r > 0))):
        out[idx] = near[tuple(int(v) for v in offsets[idx])]
    return out * h ** (dim - exponent)


@lru_cache(maxsize=16)
def _lattice_sum(dim: int, exponent: float, radius_cells: float) -> float:
    m = int(np.ceil(radius_cells))
    ax = np.arange(-m, m + 1)
    offsets = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    r = np.linalg.norm(offsets, axis=1)
    keep = (r > 0) & (r < radius_cells)
    return float(np.sum(_point_cell_weights(offsets[keep], 1.0, exponent, dim)))


def _tail_1d(domain: Domain, ps: float, index=None) -> np.ndarray:
    x = domain.cell_centers[:, 0] if index is None else domain.cell_centers[[index], 0]
    a, b = float(domain.box_lo[0]), float(domain.box_hi[0])
    return (2.0 / ps) * ((x - a) ** (-ps) + (b - x) ** (-ps))


def _tail_2d(domain: Domain, exponent: float, ps: float, index=None) -> np.ndarray:
    h = domain.h
    R = TAIL_RADIUS_FACTOR * domain.diameter
    lattice = _lattice_sum(domain.dim, exponent, R / h) * h ** (domain.dim - exponent)
    idx = domain.lattice_index()
    rows = range(domain.n_cells) if index is None else [index]
    out = np.empty(len(rows))
    for r, i in enumerate(rows):
        inside = _point_cell_weights(idx - idx[i], h, exponent, domain.dim).sum()
        out[r] = 2.0 * (lattice - inside) + radial_tail(ps, R)
    return out


def exterior_tail(domain: Domain, s: float, p: float, cell_index: int) -> float:
    """Exterior coefficient ``k_i`` of one interior cell.

    Closed form in 1D. In 2D: lattice quadrature over exterior cells out to
    radius ``4 * diam(box)`` plus the analytic tail beyond it.
    """
    check_parameters(domain.dim, s, p)
    if not 0 <= cell_index < domain.n_cells:
        raise IndexError(f"cell index {cell_index} out of range for {domain.n_cells} cells")
    ps = p * s
    if domain.dim == 1:
        value = float(_tail_1d(domain, ps, cell_index)[0])
    else:
        value = float(_tail_2d(domain, domain.dim + ps, ps, cell_index)[0])
    if not np.isfinite(value) or value <= 0:
        raise ArithmeticError(f"non-finite or nonpositive exterior coefficient {value}")
    return value


def assemble_kernel(domain: Domain, s: float, p: float) -> FractionalKernel:
    """Assemble pair weights and exterior coefficients for ``(domain, s, p)``."""
    check_parameters(domain.dim, s, p)
    dim, h = domain.dim, domain.h
    ps = p * s
    exponent = dim + ps
    idx = domain.lattice_index()
    n = domain.n_cells
    near = near_pair_integrals(dim, exponent)
    near_scale = h ** (2 * dim - exponent)

    W = np.zeros((n, n))
    for i in range(n):
        off = idx[i + 1:] - idx[i]
        r = np.linalg.norm(off, axis=1)
        row = h ** (2 * dim) * (r * h) ** (-exponent)
        for j in np.nonzero(r <= NEAR_RADIUS)[0]:
            row[j] = near_scale * near[tuple(int(v) for v in off[j])]
        W[i, i + 1:] = row
    W = W + W.T

    if dim == 1:
        tail = _tail_1d(domain, ps)
    else:
        tail = _tail_2d(domain, exponent, ps)

    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(tail))):
        raise ArithmeticError("non-finite kernel entries")
    if np.any(tail <= 0):
        raise ArithmeticError("nonpositive exterior coefficient")
    W.setflags(write=False)
    tail.setflags(write=False)
    return FractionalKernel(
        s=float(s),
        p=float(p),
        dim=dim,
        exponent=exponent,
        cell_volume=domain.cell_volume,
        pair_weights=W,
        exterior_coeff=tail,
    )
