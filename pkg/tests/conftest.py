import numpy as np
import pytest

from swingski.models import SwingParams, make_swing_pair


@pytest.fixture(scope="session")
def swing12():
    params = SwingParams(r_minus=1.0, r_plus=2.0)
    return params, make_swing_pair(params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
