import numpy as np
import pytest
from hypothesis import strategies as st

from cmvariety.chart import build_matrices
from cmvariety.sampling import make_rng, random_setup


def annulus_complex():
    """Complex numbers with modulus in [1/2, 2] and arbitrary argument."""
    return st.builds(
        lambda r, a: float(np.exp(r)) * complex(np.cos(a), np.sin(a)),
        st.floats(np.log(0.5), np.log(2.0)),
        st.floats(-np.pi, np.pi),
    )


def sample_points(seed, n, count):
    rng = make_rng(seed)
    return [random_setup(rng, n) for _ in range(count)]


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture(params=[1, 2, 3])
def chart_pair(request):
    pt = sample_points(100 + request.param, request.param, 1)[0]
    return pt, build_matrices(pt)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
