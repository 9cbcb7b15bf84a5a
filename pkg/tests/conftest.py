"""Shared fixtures and the acceptance summary block.

Acceptance tests append one line per criterion to the list returned by the
``acceptance_log`` fixture; the terminal summary hook prints the collected
lines at the end of the run so they are visible even when every test passes.
"""

import numpy as np
import pytest

from wrench_twin.config import DEFAULT_CONFIG, build_model

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_model():
    return build_model(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
