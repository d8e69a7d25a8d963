import numpy as np
import pytest

from pahy.grids import TickSeries, build_panel


def random_grid(rng, n):
    """Sorted grid of ``n + 1`` distinct points from 0 to 1."""
    inner = np.sort(rng.choice(np.arange(1, 1000), size=n - 1, replace=False)) / 1000.0
    return np.concatenate(([0.0], inner, [1.0]))


def random_panel(rng, d, n_max=30, n_min=5):
    series = []
    for k in range(d):
        n = int(rng.integers(n_min, n_max + 1))
        t = random_grid(rng, n)
        series.append(TickSeries(t, rng.normal(size=n + 1), str(k)))
    return build_panel(series, warn_boundary=False)


def brownian_panel(rng, n, sigma=1.0, noise_sd=0.0):
    t = np.linspace(0.0, 1.0, n + 1)
    x = np.concatenate(([0.0], np.cumsum(rng.normal(0.0, sigma / np.sqrt(n), n))))
    return build_panel([(t, x + noise_sd * rng.normal(size=n + 1))])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
