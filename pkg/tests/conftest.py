import numpy as np
import pytest

from seabed_outliers.grid import make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid13():
    return make_grid(13.0, 260)


@pytest.fixture
def small_grid():
    return make_grid(2.0, 20)


# one PASS/FAIL line per acceptance criterion at the end of the run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA.setdefault(name, report.outcome)
        if report.outcome != "passed":
            _CRITERIA[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda n: int(n.split("_")[2])
    for name in sorted(_CRITERIA, key=key):
        status = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {key(name):>2}: {status}  {name}")
