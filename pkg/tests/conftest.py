import math

import numpy as np
import pytest

from stringbilliard.table import hexagon_table

SQ3 = math.sqrt(3.0)
SQ6 = math.sqrt(6.0)

# acceptance verdicts, printed once at the end of the run
VERDICTS: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
    VERDICTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])


@pytest.fixture(scope="session")
def hexagon():
    return hexagon_table()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
