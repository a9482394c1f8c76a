import numpy as np
import pytest

from ddae.autoencoder import LayerParams


def random_layer(rng, n_visible, n_hidden, dec_act="sigmoid", scale=1.0):
    return LayerParams(
        scale * rng.standard_normal((n_hidden, n_visible)),
        0.5 * rng.standard_normal(n_hidden),
        0.5 * rng.standard_normal(n_visible),
        "sigmoid",
        dec_act,
    )


def central_diff(f, theta, step=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * step)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
