import numpy as np
import pytest

from wienerclt import profiles

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0  # positive root of x^2 + x - 1


def random_profile(rng, max_dim=128, separable=False):
    N = int(rng.integers(1, max_dim + 1))
    K = int(rng.integers(1, max_dim + 1))
    if separable:
        d = rng.uniform(0.0, 3.0, N)
        d[0] = max(d[0], 0.1)
        dt = rng.uniform(0.0, 3.0, K + 1)
        dt[0] = max(dt[0], 0.1)
        return profiles.build_separable(d, dt)
    grid = rng.uniform(0.0, 3.0, (N, K + 1))
    grid[rng.uniform(size=grid.shape) < 0.2] = 0.0
    grid[0, 0] = 0.5
    return profiles.build_general(grid)


@pytest.fixture
def constant_profile():
    def make(N, K, value=1.0):
        return profiles.build_separable(np.full(N, value), np.ones(K + 1))
    return make


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
