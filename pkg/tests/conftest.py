import numpy as np
import pytest
from hypothesis import settings

from sparse_mut.forward_model import FrequencySweep

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def wband():
    """75-110 GHz, 1001 points."""
    return FrequencySweep.from_band(75e9, 110e9, 1001)


@pytest.fixture
def small_sweep():
    return FrequencySweep.from_band(75e9, 110e9, 128)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
