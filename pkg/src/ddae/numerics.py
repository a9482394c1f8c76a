"""Dense float64 helpers: products, activations, losses and seeded randomness.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Vectors are
1-D arrays; a batch of vectors is a 2-D array with one sample per row.
Randomness always comes from an explicit ``numpy.random.Generator`` backed
by PCG64, so a seed fully determines every draw on every platform.
"""

import numpy as np

from .errors import NonFiniteError, ParameterError, ShapeError

CE_CLAMP = 1e-12


def make_rng(seed):
    """PCG64 generator. ``seed`` may be an int or a sequence of ints."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def check_finite(a, what="array"):
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return a


def as_matrix(a, what="matrix"):
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{what} must be 2-D, got shape {m.shape}")
    return check_finite(m, what)


def as_vector(v, what="vector"):
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"{what} must be 1-D, got shape {x.shape}")
    return check_finite(x, what)


def matmul(a, b):
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return check_finite(a @ b, "product")


def sigmoid(t):
    # tanh form is overflow-free and keeps sigmoid(t) + sigmoid(-t) == 1 tight
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=np.float64)))


def identity(t):
    return np.asarray(t, dtype=np.float64)


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"length mismatch: {x.shape} vs {y.shape}")
    return x, y


def squared_loss(x, y):
    """Sum of squared differences; works per row when given 2-D input."""
    x, y = _pair(x, y)
    d = x - y
    return np.sum(d * d, axis=-1)


def cross_entropy_loss(x, y):
    """Binary cross-entropy summed over the last axis, natural log.

    ``y`` is clamped into [1e-12, 1 - 1e-12] first since saturated sigmoid
    outputs can hit 0 or 1 exactly in float64.
    """
    x, y = _pair(x, y)
    y = np.clip(y, CE_CLAMP, 1.0 - CE_CLAMP)
    return -np.sum(x * np.log(y) + (1.0 - x) * np.log1p(-y), axis=-1)


def rng_gaussian(rng, n, sigma):
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    return sigma * rng.standard_normal(n)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)
