import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctsid import Multisine, Polynomial, TransferFunction  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def true_system():
    return TransferFunction(Polynomial([1.25]), Polynomial([1.0, 0.7, 0.25]))


@pytest.fixture
def three_sines():
    return Multisine.from_sines([1.0, 1.0, 1.0], [0.714, 1.428, 2.142])


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
