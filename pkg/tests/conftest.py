import numpy as np
import pytest

from fidstring.scenarios import seidenfeld


@pytest.fixture(scope="session")
def seid0():
    return seidenfeld((0.0, 0.0), 2.0)


@pytest.fixture(scope="session")
def seid11():
    return seidenfeld((1.0, 1.0), 2.0)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240517))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record ``(number, title, passed, detail)`` for the acceptance summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        lines.append((number, title, bool(passed), detail))
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(lines):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
