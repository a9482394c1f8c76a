import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ddae.errors import NonFiniteError, ParameterError, ShapeError
from ddae.numerics import (
    cross_entropy_loss,
    make_rng,
    matmul,
    rng_gaussian,
    sigmoid,
    softmax,
    squared_loss,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
unit = st.floats(0.01, 0.99)


def triple_loop(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), a), a)


def test_matmul_hand_arithmetic():
    assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).tolist() == [[11.0]]


def test_matmul_matches_triple_loop(rng):
    a = rng.standard_normal((5, 7))
    b = rng.standard_normal((7, 3))
    np.testing.assert_allclose(matmul(a, b), triple_loop(a, b), rtol=0, atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"2x3.*2x2"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_matmul_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        matmul([[np.nan]], [[1.0]])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_matmul_associative(n, m, k, l, seed):
    r = np.random.default_rng(seed)
    a, b, c = (r.uniform(-1, 1, s) for s in ((n, m), (m, k), (k, l)))
    left = matmul(matmul(a, b), c)
    right = matmul(a, matmul(b, c))
    scale = max(np.abs(left).max(), 1.0)
    assert np.max(np.abs(left - right)) <= 1e-9 * scale


def test_sigmoid_examples():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(math.log(3.0)) == pytest.approx(0.75, abs=1e-15)
    assert sigmoid(-math.log(3.0)) == pytest.approx(0.25, abs=1e-15)


def test_sigmoid_saturates_without_overflow():
    with np.errstate(all="raise"):
        v = sigmoid(np.array([-1e4, 1e4]))
    assert v[0] == 0.0 and v[1] == 1.0


@given(finite)
def test_sigmoid_symmetry(t):
    assert abs(sigmoid(t) + sigmoid(-t) - 1.0) <= 1e-12


@given(finite, finite)
def test_sigmoid_monotone(a, b):
    if a < b:
        assert sigmoid(a) <= sigmoid(b)


def test_squared_loss_examples():
    assert squared_loss([1, 0], [1, 0]) == 0
    assert squared_loss([1, 0], [0, 0]) == 1
    assert squared_loss([1, 2, 3], [0, 0, 0]) == 14


def test_squared_loss_length_mismatch():
    with pytest.raises(ShapeError):
        squared_loss([1.0, 2.0], [1.0])


@given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
def test_squared_loss_symmetric_and_nonnegative(x, y):
    assert squared_loss(x, y) == squared_loss(y, x)
    assert squared_loss(x, y) >= 0
    assert squared_loss(x, x) == 0


def test_cross_entropy_examples():
    assert cross_entropy_loss([1.0], [0.5]) == pytest.approx(math.log(2.0), abs=1e-15)
    assert cross_entropy_loss([0.5], [0.5]) == pytest.approx(math.log(2.0), abs=1e-15)


def test_cross_entropy_matches_scalar_loop(rng):
    x = rng.random(10)
    y = rng.uniform(0.01, 0.99, 10)
    ref = 0.0
    for xi, yi in zip(x, y):
        ref -= xi * math.log(yi) + (1 - xi) * math.log(1 - yi)
    assert cross_entropy_loss(x, y) == pytest.approx(ref, abs=1e-12)


def test_cross_entropy_clamps_saturated_outputs():
    v = cross_entropy_loss([1.0, 0.0], [0.0, 1.0])
    assert np.isfinite(v)
    # 1 - 1e-12 is not exact in float64, so the second log is only close
    assert v == pytest.approx(-2 * math.log(1e-12), rel=1e-4)


def test_cross_entropy_length_mismatch():
    with pytest.raises(ShapeError):
        cross_entropy_loss([0.5], [0.5, 0.5])


@given(arrays(np.float64, 4, elements=unit), arrays(np.float64, 4, elements=unit))
def test_cross_entropy_gibbs(x, y):
    # the target's own entropy is the minimum over predictions
    assert cross_entropy_loss(x, y) >= cross_entropy_loss(x, x) - 1e-12
    assert cross_entropy_loss(x, y) >= 0


def test_cross_entropy_swapped_order_is_not_a_bound():
    # CE(x, y) >= CE(y, y) fails in general
    assert cross_entropy_loss([0.0], [0.1]) < cross_entropy_loss([0.1], [0.1])


def test_rng_gaussian_zero_sigma():
    np.testing.assert_array_equal(rng_gaussian(make_rng(3), 4, 0.0), np.zeros(4))


def test_rng_gaussian_moments():
    v = rng_gaussian(make_rng(11), 100_000, 1.0)
    assert abs(v.mean()) <= 0.02
    assert abs(v.var() - 1.0) <= 0.03


def test_rng_gaussian_deterministic():
    np.testing.assert_array_equal(rng_gaussian(make_rng(5), 10, 2.0), rng_gaussian(make_rng(5), 10, 2.0))


def test_rng_gaussian_negative_sigma():
    with pytest.raises(ParameterError):
        rng_gaussian(make_rng(0), 3, -1.0)


def test_make_rng_is_pcg64_and_reproducible():
    a, b = make_rng(42), make_rng(42)
    assert isinstance(a.bit_generator, np.random.PCG64)
    np.testing.assert_array_equal(a.random(5), b.random(5))


def test_softmax_rows_sum_to_one(rng):
    p = softmax(rng.standard_normal((6, 4)) * 50)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p > 0)
