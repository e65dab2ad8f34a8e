import numpy as np
import pytest


def make_blobs(centers, n_per, sd=1.0, seed=0):
    """Gaussian blobs around the given centers; labels follow center index."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, center in enumerate(centers):
        xs.append(rng.normal(0.0, sd, size=(n_per, len(center))) + np.asarray(center))
        ys.append(np.full(n_per, label, dtype=np.int64))
    return np.vstack(xs), np.concatenate(ys)


@pytest.fixture
def two_blobs():
    return make_blobs([(-4.0, 0.0), (4.0, 0.0)], n_per=100, seed=3)
