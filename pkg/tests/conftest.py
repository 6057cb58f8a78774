import numpy as np
import pytest

from tidalml.lung_model import PressureProfile, SimConfig, TimeGrid


@pytest.fixture
def default_sim():
    return SimConfig()


@pytest.fixture
def short_sim():
    """Shorter run for tests that only need a settled steady state."""
    return SimConfig(PressureProfile(), TimeGrid(dt=0.01, duration=36.0, transient_cutoff=20.0))


@pytest.fixture
def toy_clusters():
    """Three tight, axis-aligned clusters far apart relative to their radius."""
    rng = np.random.default_rng(7)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.concatenate([c + rng.uniform(-0.5, 0.5, size=(30, 2)) for c in centers])
    y = np.repeat([0, 1, 2], 30)
    return X, y


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, passed, detail):
        store[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
