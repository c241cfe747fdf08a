import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regret_shape import experiments, geometry
from regret_shape.regret import RegretParams

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def ref_mesh():
    return geometry.build_reference_mesh()


@pytest.fixture(scope="session")
def coarse_mesh():
    return geometry.build_reference_mesh(0.5)


@pytest.fixture(scope="session")
def coarse_problem():
    return experiments.reference_problem("circle", 0.5)


@pytest.fixture(scope="session")
def fast_params():
    return RegretParams(sigma=0.995, t_max=1e3, max_move=0.25, max_iter=60)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
CRITERIA = {}


def record_criterion(n, passed, detail):
    CRITERIA[n] = (passed, detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
