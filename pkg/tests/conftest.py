import numpy as np
import pytest

from vkfsi.coupled_galerkin import build_bases, build_system
from vkfsi.domain_grid import Grids, build_domain
from vkfsi.shell_mechanics import PhysicalParams


@pytest.fixture(scope="session")
def small_grids():
    return Grids(build_domain(1.0, 1.0, 0.5, 8, 8, 4), 16, 16)


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def small_bases(small_grids, params):
    return build_bases(small_grids, params, 6, 6)


@pytest.fixture(scope="session")
def small_system(small_bases, params):
    return build_system(small_bases, params)


@pytest.fixture(scope="session")
def reference_grids():
    return Grids(build_domain(1.0, 1.0, 0.5, 12, 12, 8), 24, 24)


@pytest.fixture(scope="session")
def reference_bases(reference_grids, params):
    return build_bases(reference_grids, params, 8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_report.LINES):
            terminalreporter.write_line(line)
