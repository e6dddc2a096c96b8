import numpy as np
import pytest

from odstain import _kernels_numba, _kernels_numpy


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    """Either kernel module, for backend-equivalence tests."""
    return {"numpy": _kernels_numpy, "numba": _kernels_numba}[request.param]


def random_image(rng, h, w):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def uniform_image(pixel, h=4, w=4):
    return np.tile(np.asarray(pixel, dtype=np.uint8), (h, w, 1))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
