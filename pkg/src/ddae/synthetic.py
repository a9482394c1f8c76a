"""Small synthetic datasets for tests, demos and desk-scale experiments."""

import numpy as np

from .numerics import sigmoid


def rank2_sigmoid(rng, n, dim, scale=1.5):
    """Rows are sigmoid(u_i V) with u_i in R^2, so the data lie on a 2-D manifold."""
    U = rng.standard_normal((n, 2))
    V = scale * rng.standard_normal((2, dim))
    return sigmoid(U @ V)


def bars(rng, n, size=8, p=None):
    """Binary size x size images built from random horizontal and vertical bars.

    Each of the ``2 * size`` bars is switched on independently with
    probability ``p`` (default ``1 / size``); rows are flattened images.
    """
    p = 1.0 / size if p is None else p
    rows = rng.random((n, size)) < p
    cols = rng.random((n, size)) < p
    img = rows[:, :, None] | cols[:, None, :]
    return img.reshape(n, size * size).astype(np.float64)


def blobs(rng, n, centers=((-2.0, -2.0), (2.0, 2.0)), spread=0.5):
    """Isotropic Gaussian clusters in the plane, ``n`` samples in total.

    Returns ``(X, y)`` with labels in cluster order.
    """
    centers = np.asarray(centers, dtype=np.float64)
    k = len(centers)
    y = np.arange(n) % k
    X = centers[y] + spread * rng.standard_normal((n, centers.shape[1]))
    return X, y


def prototypes(rng, n, dim, n_classes, noise=0.15):
    """Labelled data in [0, 1]^dim: one random binary prototype per class plus
    Gaussian jitter, clipped to the unit cube."""
    protos = (rng.random((n_classes, dim)) < 0.5).astype(np.float64)
    y = rng.integers(0, n_classes, size=n)
    X = np.clip(protos[y] + noise * rng.standard_normal((n, dim)), 0.0, 1.0)
    return X, y
