import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from poisson_follower import Configuration, Window

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_config(points, window=None, ids=None, **kw) -> Configuration:
    """Configuration over explicit points inside a generous default window."""
    p = np.asarray(points, float).reshape(-1, 2)
    if window is None:
        lo = p.min(0) - 1 if len(p) else np.zeros(2)
        hi = p.max(0) + 1 if len(p) else np.ones(2)
        window = Window(lo[0], hi[0], lo[1], hi[1])
    if ids is None:
        ids = np.arange(len(p))
    return Configuration(ids, p, window, **kw)


def brute_leaders(points) -> np.ndarray:
    """Independent nearest-neighbour oracle on raw coordinates (plain metric)."""
    p = np.asarray(points, float)
    d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    return d2.argmin(1)  # first minimum, i.e. smallest index on ties


@pytest.fixture
def chain3():
    return make_config([(0, 0), (1, 0), (3, 0)])
