import numpy as np
import pytest

from strata_lab.surface import build_lshape, build_regular_octagon, build_torus, three_square_origami


@pytest.fixture
def torus():
    return build_torus()


@pytest.fixture
def origami():
    return three_square_origami()


@pytest.fixture
def octagon():
    return build_regular_octagon()


@pytest.fixture
def lshape():
    return build_lshape(2**0.5, 3**0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
