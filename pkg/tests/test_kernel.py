import warnings

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning, dblquad, quad

from fracpeig.energy import gagliardo_energy
from fracpeig.grid import DomainSpec, build_grid
from fracpeig.kernel import (
    assemble_kernel,
    check_parameters,
    exterior_tail,
    near_pair_integrals,
    radial_tail,
)


def interval_pair_exact(a, b, c, d, e):
    """int_a^b int_c^d (y - x)^-e dy dx for b <= c, 1 < e < 2 (closed form)."""
    H = lambda r: r ** (2 - e) / ((1 - e) * (2 - e)) if r > 0 else 0.0  # noqa: E731
    return H(d - a) - H(d - b) - H(c - a) + H(c - b)


def test_two_cell_weight_closed_form():
    # s = 0.25, p = 2: adjacent halves of (0, 1) with kernel |x-y|^-1.5
    k = assemble_kernel(build_grid(DomainSpec.interval(0, 1, 2)), 0.25, 2.0)
    exact = 4 * (2 - np.sqrt(2)) * 0.5**0.5
    assert interval_pair_exact(0, 0.5, 0.5, 1.0, 1.5) == pytest.approx(exact, rel=1e-14)
    assert k.pair_weights[0, 1] == pytest.approx(exact, rel=0.05)
    # the self-similar near-field scheme is in fact exact to rounding
    assert k.pair_weights[0, 1] == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("s,p", [(0.3, 1.5), (0.4, 2.0), (0.3, 3.0)])
def test_1d_weights_against_exact_integrals(s, p):
    n = 12
    d = build_grid(DomainSpec.interval(0, 1, n))
    k = assemble_kernel(d, s, p)
    h, e = d.h, 1 + p * s
    for j in range(1, n):
        exact = interval_pair_exact(0, h, j * h, (j + 1) * h, e)
        # near pairs are exact; far pairs carry the midpoint error ~ e(e+1)/(12 j^2)
        rel = 1e-12 if j <= 2 else e * (e + 1) / (12 * j**2) * 1.5
        assert k.pair_weights[0, j] == pytest.approx(exact, rel=rel)


def test_symmetry_exact_and_positive(kernel32):
    for k in kernel32.values():
        W = k.pair_weights
        assert np.array_equal(W, W.T)
        off = ~np.eye(k.n_cells, dtype=bool)
        assert np.all(W[off] > 0) and np.all(np.diag(W) == 0)
        assert np.all(k.exterior_coeff > 0)


def test_weights_decrease_with_distance():
    for spec in (DomainSpec.interval(0, 1, 20), DomainSpec.rectangle(n=9)):
        d = build_grid(spec)
        k = assemble_kernel(d, 0.3, 2.0)
        row = k.pair_weights[0]
        # along the first axis from cell 0
        step = 1 if d.dim == 1 else d.cells_per_axis[1]
        line = row[step::step]
        assert np.all(np.diff(line) < 0)


def test_1d_tail_closed_form():
    d = build_grid(DomainSpec.interval(0, 1, 16))
    s, p = 0.3, 2.0
    ps = p * s
    k = assemble_kernel(d, s, p)
    x = d.cell_centers[:, 0]
    np.testing.assert_allclose(k.exterior_coeff, 2 / ps * (x**-ps + (1 - x) ** -ps), rtol=1e-10)


def test_tail_at_midpoint():
    d = build_grid(DomainSpec.interval(0, 1, 3))  # middle cell center at 0.5
    assert exterior_tail(d, 0.25, 2.0, 1) == pytest.approx(8 * np.sqrt(2), rel=1e-12)


def test_tail_larger_near_boundary(kernel32):
    k = kernel32[2.0].exterior_coeff
    assert k[0] > k[16] and k[-1] > k[15]


def test_radial_tail_value():
    assert radial_tail(0.5, 4.0) == pytest.approx(4 * np.pi, rel=1e-14)


def _square_ray(x, theta):
    dvec = np.array([np.cos(theta), np.sin(theta)])
    ts = [((1.0 if dv > 0 else 0.0) - xa) / dv for xa, dv in zip(x, dvec) if abs(dv) > 1e-15]
    return min(ts)


def test_2d_tail_against_polar_oracle():
    # k(x) = (2/ps) int_0^{2 pi} r(x, theta)^-ps d theta, r = distance to the boundary along the ray
    d = build_grid(DomainSpec.rectangle(n=8))
    s, p = 0.25, 2.0
    ps = p * s
    k = assemble_kernel(d, s, p)
    for i in (0, 9, 27, 36):
        x = d.cell_centers[i]
        corners = [np.arctan2(cy - x[1], cx - x[0]) % (2 * np.pi) for cx in (0, 1) for cy in (0, 1)]
        ref = 2 / ps * quad(lambda t: _square_ray(x, t) ** -ps, 0, 2 * np.pi, points=corners, limit=200)[0]
        # far exterior cells use the midpoint rule, which costs about 1%
        assert k.exterior_coeff[i] == pytest.approx(ref, rel=0.02)
        assert exterior_tail(d, s, p, i) == pytest.approx(k.exterior_coeff[i], rel=1e-14)


def _tent(z1, z2):
    return (1 - abs(z1)) * (1 - abs(z2))


def test_2d_near_pairs_against_polar_quadrature():
    e = 2.5
    ref = near_pair_integrals(2, e)

    def rmax10(t):
        c, s = np.cos(t), np.sin(t)
        return min(2 / c if c > 1e-15 else np.inf, 1 / abs(s) if abs(s) > 1e-15 else np.inf)

    f = lambda r, t: _tent(r * np.cos(t) - 1, r * np.sin(t)) * r ** (1 - e)  # noqa: E731
    cuts = [-np.pi / 2, -np.pi / 4, 0, np.pi / 4, np.pi / 2]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        v = sum(dblquad(f, a, b, 0, rmax10, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(cuts[:-1], cuts[1:]))
    assert ref[(1, 0)] == pytest.approx(v, rel=1e-9)

    g = lambda z2, z1: _tent(z1, z2) * ((z1 + 2) ** 2 + z2**2) ** (-e / 2)  # noqa: E731
    v = sum(dblquad(g, a, b, c, dd, epsabs=1e-14)[0] for a, b in ((-1, 0), (0, 1)) for c, dd in ((-1, 0), (0, 1)))
    assert ref[(2, 0)] == pytest.approx(v, rel=1e-10)


def test_disk_kernel_assembles():
    d = build_grid(DomainSpec.disk(n=10))
    k = assemble_kernel(d, 0.3, 2.0)
    assert np.all(np.isfinite(k.pair_weights)) and np.all(k.exterior_coeff > 0)
    # staircase boundary: the tail counts every box cell outside the disk
    corner_adjacent = np.argmin(np.linalg.norm(d.cell_centers - 0.5, axis=1))
    assert k.exterior_coeff[corner_adjacent] == k.exterior_coeff.min()


def test_refinement_consistency():
    # hat profile: energy changes by less than 20% between n and 2n
    vals = []
    for n in (16, 32):
        d = build_grid(DomainSpec.interval(0, 1, n))
        x = d.cell_centers[:, 0]
        vals.append(gagliardo_energy(assemble_kernel(d, 0.3, 2.0), 2.0, np.minimum(x, 1 - x)))
    assert abs(vals[1] / vals[0] - 1) < 0.2


@pytest.mark.parametrize(
    "dim,s,p,match",
    [(1, 0.0, 2.0, "s must"), (1, 0.5, 1.0, "p must"), (1, 0.6, 2.0, "p\\*s < N"), (2, 0.6, 2.0, "non-finite")],
)
def test_parameter_errors(dim, s, p, match):
    with pytest.raises(ValueError, match=match):
        check_parameters(dim, s, p)


def test_kernel_csv_dump(tmp_path, kernel8):
    k = kernel8[2.0]
    path = tmp_path / "k.csv"
    k.to_csv(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:-1], k.pair_weights)
    np.testing.assert_array_equal(rows[-1], k.exterior_coeff)


def test_stiffness_matches_energy(kernel8, rng):
    k = kernel8[2.0]
    u = rng.standard_normal(k.n_cells)
    assert u @ k.stiffness_matrix() @ u == pytest.approx(gagliardo_energy(k, 2.0, u), rel=1e-13)
