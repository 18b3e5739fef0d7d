import numpy as np
import pytest

from primex_track.belief import GaussianBelief, MotionModel, SensorModel, validation
from primex_track.network import NetworkGraph


def bidirectional(n, pairs, sensors):
    edges = {(a, b) for a, b in pairs} | {(b, a) for a, b in pairs}
    return NetworkGraph(n, tuple(sensors), frozenset(edges))


@pytest.fixture(autouse=True)
def _checked_beliefs():
    # symmetry and definiteness checks on every belief operation
    with validation(True):
        yield


@pytest.fixture(scope="session")
def motion():
    return MotionModel.constant_velocity()


@pytest.fixture(scope="session")
def sensor():
    return SensorModel.position()


@pytest.fixture(scope="session")
def prior():
    return GaussianBelief.from_moments(np.array([0.0, 0.0, 100.0, 100.0]), 25.0 * np.eye(4))


@pytest.fixture
def path3():
    return bidirectional(3, [(0, 1), (1, 2)], [0, 2])


ACCEPTANCE_LINES = []


def record(number, ok, text):
    """Print and keep one verdict line for an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
