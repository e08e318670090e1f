import numpy as np
import pytest

from poissonctl import generate_annulus, generate_disk


@pytest.fixture(scope="session")
def disk():
    """Workhorse unit disk, h = 0.1."""
    return generate_disk(1.0, 0.1)


@pytest.fixture(scope="session")
def disk_fine():
    """Finer unit disk for geometry checks, h = 0.05."""
    return generate_disk(1.0, 0.05)


@pytest.fixture(scope="session")
def annulus():
    return generate_annulus(1.0, 2.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


# One line per acceptance criterion, echoed after the test summary so a
# plain pytest run shows the verdicts without -s.
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(num, ok, detail):
        line = "criterion %d: %s  (%s)" % (num, "PASS" if ok else "FAIL", detail)
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
