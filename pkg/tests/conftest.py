import numpy as np
import pytest


def random_neighborhoods(n_cases, seed, max_size=64, extent=75.2, m=3):
    """Random point sets with sizes 1..max_size and centers up to +-extent."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_cases):
        n = int(rng.integers(1, max_size + 1))
        center = rng.uniform(-extent, extent, m)
        spread = 10.0 ** rng.uniform(-2, 0.5)
        out.append(center + rng.normal(0.0, spread, (n, m)))
    return out


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
