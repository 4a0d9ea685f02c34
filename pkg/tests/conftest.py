import numpy as np
import pytest

from junctionlab.core import GridSpec, trace_of_Y
from junctionlab.epi import PerturbationSpec, perturb_trace
from junctionlab.solver import minimize

PERTURBED = PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05)


@pytest.fixture(scope="session")
def solved_y64():
    u, rep = minimize(trace_of_Y(), grid=GridSpec(2, 1 / 64), N=3)
    return u, rep


@pytest.fixture(scope="session")
def solved_perturbed128():
    c = perturb_trace(PERTURBED)
    u, rep = minimize(c, grid=GridSpec(2, 1 / 128), N=c.N)
    return u, rep


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
