import sys

import numpy as np
import pytest

from eee_ofdma.power_model import SystemParams


@pytest.fixture
def scenario1():
    return SystemParams(2, 3, 1e5, p_max=1.0, p_c=0.1)


@pytest.fixture
def scenario2():
    return SystemParams(2, 2, 1e5, p_max=1.0, p_c=0.1)


@pytest.fixture
def thetas():
    return np.array([0.1, 0.25])


def pytest_terminal_summary(terminalreporter):
    results = {}
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            results.update(getattr(mod, "RESULTS", {}))
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
