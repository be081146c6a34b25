import sys
from pathlib import Path

import pytest
from hypothesis import settings

from spos_gebd.numerics import precision

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def f64():
    with precision(64):
        yield


def pytest_terminal_summary(terminalreporter):
    from criteria import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
