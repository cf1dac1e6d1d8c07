import numpy as np
import pytest

from faberpade import Disk, Ellipse, Segment

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def unit_disk():
    return Disk(0, 1)


@pytest.fixture
def unit_segment():
    return Segment(-1, 1)


@pytest.fixture
def ellipse21():
    return Ellipse(0, 2, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
