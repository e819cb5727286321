"""Acceptance checks, one or more tests per numbered criterion.

Run ``pytest tests/test_acceptance.py`` for the pass/fail lines at the end
of the report. Expensive spectra are cached per session.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from fracpeig import experiments as ex
from fracpeig.eigensolvers import (
    SolverConfig,
    check_simplicity,
    compute_monotonicity_constant,
    lambda2_upper_from_nodal,
    p2_oracle_spectrum,
    solve_lambda1,
)
from fracpeig.energy import (
    WeightField,
    gagliardo_energy,
    gagliardo_gradient,
    weighted_lp_energy,
    weighted_lp_gradient,
)
from fracpeig.grid import DomainSpec, build_grid
from fracpeig.inequalities import SWEEPS, run_all_sweeps
from fracpeig.kernel import assemble_kernel

from conftest import weights_for

PS = (1.5, 2.0, 3.0)
# p*s < 1 is needed for piecewise constants, so the p sweeps run at s = 0.3
S_SWEEP = 0.3
CONFIG = SolverConfig()


@lru_cache(maxsize=None)
def setup(n, s, p):
    domain = build_grid(DomainSpec.interval(0.0, 1.0, n))
    return domain, assemble_kernel(domain, s, p), weights_for(domain, s, p)


@lru_cache(maxsize=None)
def spectrum(n, s, p, name):
    _, kernel, weights = setup(n, s, p)
    t0 = time.perf_counter()
    first = solve_lambda1(kernel, weights[name], p, CONFIG)
    t1 = time.perf_counter()
    spec = ex.solve_spectrum(kernel, weights[name], p, CONFIG)
    t2 = time.perf_counter()
    return spec, t1 - t0, t2 - t0


@lru_cache(maxsize=None)
def oracle(n, s, p, name):
    _, kernel, weights = setup(n, s, p)
    return p2_oracle_spectrum(kernel, weights[name], 2)


ORACLE_CASES = [(n, name) for n in (32, 64) for name in ("constant", "step", "singular")]


# -- 1, 2: oracle equivalence --------------------------------------------------


@pytest.mark.criterion(1)
@pytest.mark.parametrize("n, name", ORACLE_CASES)
def test_lambda1_matches_oracle(n, name):
    spec, t_first, _ = spectrum(n, 0.4, 2.0, name)
    ref = oracle(n, 0.4, 2.0, name)
    assert spec.first.converged
    assert spec.first.lam == pytest.approx(ref[0].lam, rel=1e-6)
    assert t_first < 30.0


@pytest.mark.criterion(2)
@pytest.mark.parametrize("n, name", ORACLE_CASES)
def test_lambda2_matches_oracle(n, name):
    spec, _, elapsed = spectrum(n, 0.4, 2.0, name)
    ref = oracle(n, 0.4, 2.0, name)
    _, kernel, weights = setup(n, 0.4, 2.0)
    assert spec.second.lam == pytest.approx(ref[1].lam, rel=1e-3)
    upper = lambda2_upper_from_nodal(kernel, weights[name], 2.0, ref[1].u)
    assert upper == pytest.approx(ref[1].lam, rel=1e-6)
    assert elapsed < 60.0


# -- 3, 4: structure and simplicity -------------------------------------------


@pytest.mark.criterion(3)
@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("name", ["constant", "step", "singular"])
def test_spectral_structure(p, name):
    spec, _, _ = spectrum(32, S_SWEEP, p, name)
    first, second = spec.first, spec.second
    assert spec.converged
    assert first.lam > 0
    assert second.lam - first.lam > 1e-6 * first.lam
    assert np.all(first.u > 0)
    top = second.u
    assert top.max() > 0 > top.min()


@pytest.mark.criterion(4)
@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("name", ["constant", "singular"])
def test_simplicity(p, name):
    _, kernel, weights = setup(32, S_SWEEP, p)
    rep = check_simplicity(kernel, weights[name], p, CONFIG, trials=5)
    lam1 = rep.lambdas.min()
    assert rep.eigenvalue_spread < 1e-8 * lam1
    assert rep.eigenfunction_distance < 1e-4


# -- 5: homogeneity -------------------------------------------------------------


@pytest.mark.criterion(5)
@pytest.mark.parametrize("p", PS)
def test_homogeneity_nonlinear(p):
    _, kernel, weights = setup(16, S_SWEEP, p)
    m = weights["step"]
    base = ex.solve_spectrum(kernel, m, p, CONFIG)
    for t in (0.5, 2.0, 10.0):
        other = ex.solve_spectrum(kernel, m.scaled(t), p, CONFIG)
        assert other.converged
        assert other.first.lam * t == pytest.approx(base.first.lam, rel=1e-6)
        assert other.second.lam * t == pytest.approx(base.second.lam, rel=1e-6)


@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", ["constant", "step", "singular"])
def test_homogeneity_oracle(name):
    _, kernel, weights = setup(32, 0.4, 2.0)
    base = p2_oracle_spectrum(kernel, weights[name], 2)
    for t in (0.5, 2.0, 10.0):
        other = p2_oracle_spectrum(kernel, weights[name].scaled(t), 2)
        for a, b in zip(base, other):
            assert b.lam * t == pytest.approx(a.lam, rel=1e-10)


# -- 6, 7: monotonicity ---------------------------------------------------------


def weight_pairs(domain, p):
    """Three pairs with m <= m_tilde touching somewhere, three with m < m_tilde."""
    x = domain.cell_centers[:, 0]
    vol = domain.cell_volume
    base = weights_for(domain, S_SWEEP, p)
    one, step, sing = base["constant"], base["step"], base["singular"]
    bump = np.where(x < 0.5, 1.0, 0.0)
    gauss = np.exp(-40.0 * (x - 0.3) ** 2)
    touching = [
        (one, WeightField(one.values + bump, vol, "1 + bump on [0, 1/2)")),
        (step, WeightField(np.maximum(step.values, 0.5), vol, "step lifted on its negative part")),
        (sing, WeightField(sing.values + np.where(x > 0.7, 2.0, 0.0), vol, "singular + bump on (0.7, 1]")),
    ]
    strict = [
        (one, WeightField(1.5 + 0.3 * gauss, vol, "1.5 + gaussian")),
        (step, WeightField(step.values + 0.25 + 0.1 * x, vol, "step + ramp")),
        (sing, WeightField(sing.values * 1.2 + 0.05, vol, "1.2 singular + 0.05")),
    ]
    return touching, strict


@lru_cache(maxsize=None)
def reports(p):
    domain, kernel, _ = setup(16, S_SWEEP, p)
    touching, strict = weight_pairs(domain, p)
    return (
        [ex.monotonicity_report(kernel, m, mt, p, CONFIG) for m, mt in touching],
        [ex.monotonicity_report(kernel, m, mt, p, CONFIG) for m, mt in strict],
    )


@pytest.mark.criterion(6)
@pytest.mark.parametrize("p", PS)
def test_monotonicity_claims(p):
    touching, strict = reports(p)
    for rep in touching + strict:
        assert rep.converged
        # (i)
        assert rep.lambda1_m >= rep.lambda1_mt - 1e-8
        assert rep.lambda2_m >= rep.lambda2_mt - 1e-8
        # (ii)
        assert rep.differs
        assert rep.lambda1_m - rep.lambda1_mt > 1e-6 * rep.lambda1_m
    for rep in touching:
        assert not rep.strictly_below and rep.claim_iii is None
    for rep in strict:
        # (iii)
        assert rep.strictly_below
        assert rep.lambda2_m - rep.lambda2_mt > 1e-6 * rep.lambda2_m
        assert rep.claim_iii


@pytest.mark.criterion(6)
def test_monotonicity_oracle_p2():
    touching, strict = reports(2.0)
    for rep in touching + strict:
        ref_m, ref_mt = rep.oracle["lambda_m"], rep.oracle["lambda_m_tilde"]
        assert ref_m[0] == pytest.approx(rep.lambda1_m, rel=1e-10)
        assert ref_mt[0] == pytest.approx(rep.lambda1_mt, rel=1e-10)
        assert ref_m[1] == pytest.approx(rep.lambda2_m, rel=1e-10)
        assert ref_mt[1] == pytest.approx(rep.lambda2_mt, rel=1e-10)
        assert ref_m[0] - ref_mt[0] > 1e-6 * ref_m[0]
        assert ref_m[1] >= ref_mt[1] - 1e-10


@pytest.mark.criterion(7)
@pytest.mark.parametrize("p", PS)
def test_constant_doubling(p):
    _, kernel, weights = setup(16, S_SWEEP, p)
    m = weights["constant"]
    lam1 = solve_lambda1(kernel, m, p, CONFIG)
    C = compute_monotonicity_constant(kernel, m, m.scaled(2.0), p, 1.5 * lam1.lam, CONFIG, e1=lam1.u)
    assert C == pytest.approx(2.0, rel=1e-8)


@pytest.mark.criterion(7)
@pytest.mark.parametrize("p", PS)
def test_constant_bound(p):
    _, strict = reports(p)
    for rep in strict:
        assert rep.constant > 1.0 + 1e-6
        assert rep.lambda2_mt <= rep.lambda2_m / rep.constant * (1.0 + 1e-3)


# -- 8, 9, 10 -------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_inequality_sweeps():
    t0 = time.perf_counter()
    outcomes = run_all_sweeps(seed=0)
    elapsed = time.perf_counter() - t0
    assert {o.name for o in outcomes} == set(SWEEPS)
    for o in outcomes:
        assert o.samples >= 10_000
        assert o.worst_gap >= -1e-10, (o.name, o.worst_inputs)
    assert elapsed < 60.0


@pytest.mark.criterion(9)
@pytest.mark.parametrize("p", PS)
def test_gradients_match_central_differences(p):
    _, kernel, weights = setup(32, S_SWEEP, p)
    m = weights["step"]
    rng = np.random.default_rng([9, int(10 * p)])
    h = 1e-5
    n = kernel.n_cells
    for _ in range(20):
        u = rng.standard_normal(n)
        for energy, grad, obj in ((gagliardo_energy, gagliardo_gradient, kernel), (weighted_lp_energy, weighted_lp_gradient, m)):
            g = grad(obj, p, u)
            fd = np.array([(energy(obj, p, u + h * e) - energy(obj, p, u - h * e)) / (2 * h) for e in np.eye(n)])
            assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


@pytest.mark.criterion(10)
@pytest.mark.parametrize("p", [1.5, 2.0])
def test_solve_is_deterministic(tmp_path, p):
    cfg = ex.ExperimentConfig(domain=DomainSpec.interval(0.0, 1.0, 16), s=S_SWEEP, p=p,
                              weight={"kind": "singular", "alpha": 0.1})
    a, _, code_a = ex.run_solve(cfg, str(tmp_path / "a"))
    b, _, code_b = ex.run_solve(cfg, str(tmp_path / "b"))
    assert code_a == code_b == 0
    for name in ("eigenpairs.json", "manifest.json", "eigenfunction_1.csv", "eigenfunction_2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
