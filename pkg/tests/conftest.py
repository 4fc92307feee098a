import numpy as np
import pytest

from rislos.array import Aoa, ArrayGeometry, array_response, search_grid
from rislos.configurator import build_codebook

_acceptance_lines = []


@pytest.fixture
def report():
    """Collects one summary line per acceptance criterion."""
    def add(criterion, passed, detail):
        _acceptance_lines.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return add


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def geom():
    return ArrayGeometry(8, 8, 0.25, 0.25)


@pytest.fixture(scope="session")
def small_geom():
    return ArrayGeometry(4, 4, 0.25, 0.25)


@pytest.fixture(scope="session")
def h(geom):
    return array_response(geom, Aoa(0.3, -0.2))


@pytest.fixture(scope="session")
def grid():
    return search_grid(181, 181)


@pytest.fixture(scope="session")
def small_grid():
    return search_grid(31, 31)


@pytest.fixture
def codebook(h, geom):
    return build_codebook(h, geom)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
