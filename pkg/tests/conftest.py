import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from postcons.measures import DominatingGrid, GridDensity

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def density(values, cell_mass=None):
    v = np.asarray(values, dtype=float)
    grid = DominatingGrid(np.arange(v.size, dtype=float), cell_mass)
    return GridDensity(grid, v)


def random_simplex(rng, k, floor=0.0):
    p = rng.dirichlet(np.ones(k))
    if floor:
        p = floor + (1.0 - k * floor) * p
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit2():
    return DominatingGrid.uniform(2)


ACCEPTANCE = []


def record(number, title, passed, detail):
    """Store one acceptance line; all lines are repeated in the terminal summary."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
