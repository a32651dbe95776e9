import numpy as np
import pytest

from qcurv.core import coefficients
from qcurv.delaunay import cached_orbit


@pytest.fixture(scope="session")
def orbit_at():
    """``orbit_at(rel, n)`` returns the shot orbit with eps = rel * eps_n."""

    def get(rel, n=5):
        return cached_orbit(rel * coefficients(n).eps_n, n)

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def fit_grid(orbit_at):
    """Fits of synthetic tails over the 3x3x3 parameter grid, n = 5.

    Entries are ``(eps, T, a, result_or_exception)``.
    """
    from qcurv.asymptotics import FitError, fit_tail, synthesize_tail
    from qcurv.checks import FIT_GRID

    c = coefficients(5)
    out = []
    for rel, Trel, a in FIT_GRID:
        o = orbit_at(rel)
        T = Trel * o.period
        try:
            out.append((o.eps, T, a, fit_tail(synthesize_tail(o.eps, T, a, 5), c)))
        except FitError as exc:
            out.append((o.eps, T, a, exc))
    return out


# --- acceptance summary -------------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        _CRITERIA[report.nodeid] = (props.get("criterion", report.nodeid), report.outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, detail in sorted(_CRITERIA.values(), key=lambda x: int(x[0].split()[1].rstrip(":"))):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label} {status}  {detail}".rstrip())
