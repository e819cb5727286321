import numpy as np
import pytest

from fracpeig.energy import WeightField
from fracpeig.grid import DomainSpec, build_grid
from fracpeig.kernel import assemble_kernel


@pytest.fixture(scope="session")
def interval8():
    return build_grid(DomainSpec.interval(0.0, 1.0, 8))


@pytest.fixture(scope="session")
def interval32():
    return build_grid(DomainSpec.interval(0.0, 1.0, 32))


@pytest.fixture(scope="session")
def kernel8(interval8):
    return {p: assemble_kernel(interval8, 0.3, p) for p in (1.5, 2.0, 3.0)}


@pytest.fixture(scope="session")
def kernel32(interval32):
    return {p: assemble_kernel(interval32, 0.3, p) for p in (1.5, 2.0, 3.0)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def weights_for(domain, s, p):
    """The three weight families used across the suite."""
    return {
        "constant": WeightField.constant(domain),
        "step": WeightField.step(domain, 0.5, 1.0, -1.0),
        "singular": WeightField.singular(domain, s, p, 0.3 * p * s),
    }


# -- acceptance bookkeeping ---------------------------------------------------
# Tests marked ``@pytest.mark.criterion(k)`` feed one pass/fail line per
# criterion into the terminal summary. A criterion passes only if every test
# carrying its number passed; an unexecuted criterion shows as "not run".

ACCEPTANCE_TITLES = {
    1: "lambda_1 matches the p = 2 oracle",
    2: "lambda_2 path and nodal bound match the p = 2 oracle",
    3: "positivity, spectral gap, signs of eigenfunctions",
    4: "simplicity under multi-start",
    5: "weight homogeneity",
    6: "monotonicity claims (i)-(iii)",
    7: "monotonicity constant",
    8: "inequality sweeps",
    9: "finite-difference gradients",
    10: "byte-identical reruns",
}
_criterion_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for k in marker.args:
            _criterion_outcomes.setdefault(k, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k, title in ACCEPTANCE_TITLES.items():
        results = _criterion_outcomes.get(k)
        if not results:
            status = "not run"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {k:>2}: {status:<7} {title}")
