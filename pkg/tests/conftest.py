import numpy as np
import pytest

from active_sysid.linalg import random_pd

# criterion lines collected by test_acceptance and printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_pd(dim, rng, low=0.5, high=2.0):
    return random_pd(dim, rng, low, high)
