import os

import pytest

from helpers import ACCEPTANCE_LOG, ball_spec, grid_of, two_layer_spec
from resonator.domain import DomainSpec, LayerSpec


@pytest.fixture(scope="session")
def ball12():
    spec = ball_spec(12)
    return spec, grid_of(spec)


@pytest.fixture(scope="session")
def ball16():
    spec = ball_spec(16)
    return spec, grid_of(spec)


@pytest.fixture(scope="session")
def ball24():
    spec = ball_spec(24)
    return spec, grid_of(spec)


@pytest.fixture(scope="session")
def layered16():
    spec = two_layer_spec(16)
    return spec, grid_of(spec)


@pytest.fixture(scope="session")
def ellipsoid10():
    spec = DomainSpec("ellipsoid", (1.0, 0.8, 0.6), (LayerSpec(1.0, 2.0),), 10)
    return spec, grid_of(spec)


@pytest.fixture
def seed():
    return int(os.environ.get("RESONATOR_SEED", "0"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_LOG):
        terminalreporter.line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
