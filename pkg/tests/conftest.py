import numpy as np
import pytest

_ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False,
                     help="run the long end-to-end pipeline checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "full: long-running end-to-end check (needs --full)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full"):
        return
    skip = pytest.mark.skip(reason="needs --full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def criterion():
    """Record one acceptance line; call with (number, title, passed, detail).

    ``passed=None`` records a skipped criterion.
    """

    def record(number, title, passed, detail=""):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"[{status}] criterion {number:>2}: {title}"
        if detail:
            line += f" -- {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
