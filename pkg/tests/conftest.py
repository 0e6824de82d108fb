"""Shared fixtures: the s = 1/2 cosine layer is solved once per session."""
import pytest

from dislodyn.layer import solve_layer
from dislodyn.potential import make_cosine_potential


@pytest.fixture(scope="session")
def cosine():
    return make_cosine_potential()


@pytest.fixture(scope="session")
def half_layer(cosine):
    return solve_layer(cosine, 0.5, L=40.0, h=0.05)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
