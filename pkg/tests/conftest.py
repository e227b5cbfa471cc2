import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from soliton_forge import InitialConditions, IntegrationParams, integrate  # noqa: E402

ACCEPTANCE_LINES: list = []


@lru_cache(maxsize=None)
def solved(topology: str, orbit: float, f0: float, r_max=None):
    return integrate(InitialConditions(topology, orbit, f0), IntegrationParams(r_max=r_max))


@pytest.fixture(scope="session")
def s1_ref():
    return solved("s1r3", 1.0, -1.0)


@pytest.fixture(scope="session")
def s2_ref():
    return solved("s2r2", 1.0, -1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
