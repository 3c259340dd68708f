import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gwspine.offspring import deterministic, finite, geometric, make_dyadic_power_log
from gwspine.pgf import build_norming_table

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def binary():
    return deterministic(2)


@pytest.fixture(scope="session")
def coin():
    """Support {1, 2}, half each."""
    return finite(0.5, 0.5)


@pytest.fixture(scope="session")
def geom():
    return geometric(0.5)


@pytest.fixture(scope="session")
def dyadic():
    return make_dyadic_power_log(2.0)


@pytest.fixture(scope="session")
def geom_table(geom):
    return build_norming_table(geom, 0.5, 41)


@pytest.fixture(scope="session")
def dyadic_table(dyadic):
    return build_norming_table(dyadic, 0.5, 41)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria register here and are listed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
