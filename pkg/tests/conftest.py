import numpy as np
import pytest

from adaptflow.gradcheck import max_relative_error, numerical_grad
from adaptflow.tensor import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fd_check(fn, x, tol=1e-4):
    """Compare the autodiff gradient of scalar ``fn(Tensor)`` with central differences."""
    t = Tensor(x, requires_grad=True)
    fn(t).backward()
    numeric = numerical_grad(lambda: fn(Tensor(x)).item(), x)
    err = max_relative_error(t.grad, numeric)
    assert err <= tol, err
    return t.grad, numeric


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number] = ("PASS" if report.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
