"""Shared pytest hooks: the acceptance suite records one verdict line per
criterion and they are printed together at the end of the run."""

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture(scope="session")
def verdicts(pytestconfig):
    """Append ``(number, title, ok, detail)`` tuples for the summary."""
    return pytestconfig.stash[_KEY]


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(rows):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number:2d}] {title}: {detail}")
