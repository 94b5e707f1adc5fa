import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nmorbeam.physics import BeamParams, GeometryParams  # noqa: E402


@pytest.fixture
def beam():
    return BeamParams(total_current=100e-6, width_w=1e-3)


@pytest.fixture
def geometry():
    return GeometryParams()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
