import numpy as np
import pytest

from designlab import _kernels
from designlab.core import SeedSpec, make_rng


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    previous = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)


@pytest.fixture
def rng():
    return make_rng(SeedSpec(20240101, 0))


def gaussian_design(n, d, seed):
    return make_rng(SeedSpec(seed, 0)).normal((n, d))


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
