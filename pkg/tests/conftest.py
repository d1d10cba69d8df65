import numpy as np
import pytest

from helpers import toy_party
from energy_loans.profile_io import TOY_NET_A, TOY_NET_B


@pytest.fixture
def toy_parties():
    return toy_party("A", TOY_NET_A), toy_party("B", TOY_NET_B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS

    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
