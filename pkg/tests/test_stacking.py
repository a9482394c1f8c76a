import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, random_layer, rel_err
from ddae.autoencoder import DAE, DDAE_COM, LayerParams, NoiseSpec, ObjectiveSpec, encode
from ddae.errors import DataError, DivergenceError, ShapeError, StateError
from ddae.numerics import make_rng
from ddae.stacking import (
    FineTuneConfig,
    StackedModel,
    _params_of,
    _rebuild,
    derive_seed,
    dropout_mask,
    evaluate_error_rate,
    finetune,
    forward_features,
    greedy_pretrain,
    mean_cross_entropy,
    predict,
    softmax_predict,
    supervised_gradient,
)
from ddae.synthetic import blobs, rank2_sigmoid
from ddae.training import TrainConfig, initial_params, train

M25 = NoiseSpec.masking(25)


def random_model(rng, sizes=(5, 4, 3), classes=3):
    layers = tuple(random_layer(rng, a, b) for a, b in zip(sizes, sizes[1:]))
    return StackedModel(layers, rng.standard_normal((classes, sizes[-1])), rng.standard_normal(classes))


def scalar_softmax(z):
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = sum(e)
    return [v / s for v in e]


# ------------------------------------------------------------ structure


def test_dimension_chain_checked(rng):
    with pytest.raises(ShapeError):
        StackedModel((random_layer(rng, 5, 4), random_layer(rng, 3, 2)))


def test_empty_stack_rejected():
    with pytest.raises(ShapeError):
        StackedModel(())


def test_classifier_shape_checked(rng):
    with pytest.raises(ShapeError):
        StackedModel((random_layer(rng, 5, 4),), np.zeros((2, 3)), np.zeros(2))


def test_classifier_weights_and_bias_together(rng):
    with pytest.raises(StateError):
        StackedModel((random_layer(rng, 5, 4),), np.zeros((2, 4)), None)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(3, 1) == derive_seed(3, 1)
    assert len({derive_seed(3, k) for k in range(20)}) == 20


# ------------------------------------------------------------- pretrain


@pytest.fixture(scope="module")
def data():
    return rank2_sigmoid(make_rng(2), 120, 12)


def test_single_layer_stack_equals_direct_training(data):
    spec = ObjectiveSpec(DDAE_COM, M25, M25, lam=0.3)
    cfg = TrainConfig(eta=0.05, epochs=3, seed=5)
    m = greedy_pretrain(data, [6], spec, cfg)
    direct = train(data, spec, cfg, n_hidden=6)
    assert m.layers[0].same_as(direct.params)
    assert not m.has_classifier


def test_two_layers_zero_epochs_stay_at_init(data):
    cfg = TrainConfig(epochs=0, seed=8)
    m = greedy_pretrain(data, [6, 3], ObjectiveSpec(DAE, M25), cfg)
    assert m.layers[0].same_as(initial_params(8, 12, 6))
    assert m.layers[1].same_as(initial_params(derive_seed(8, 1), 6, 3))
    assert forward_features(m, data).shape == (120, 3)


def test_second_layer_sees_clean_codes(data):
    seen = {}
    m = greedy_pretrain(
        data, [16, 8], ObjectiveSpec(DAE, M25), TrainConfig(eta=0.05, epochs=2, seed=1),
        on_layer=lambda k, rep, inputs: seen.setdefault(k, inputs),
    )
    np.testing.assert_array_equal(seen[0], data)
    np.testing.assert_allclose(seen[1], encode(m.layers[0], data), rtol=0, atol=0)


def test_pretrain_divergence_names_layer():
    X = np.full((4, 3), 1e3)
    spec = ObjectiveSpec(DAE, NoiseSpec.none(), recon_loss="squared")
    with pytest.raises(DivergenceError) as info:
        greedy_pretrain(X, [2], spec, TrainConfig(eta=1e6, epochs=200), dec_act="identity")
    assert info.value.layer == 0
    assert "layer 0" in str(info.value)


# ------------------------------------------------------------- features


def test_single_layer_features_equal_encode(rng):
    p = random_layer(rng, 5, 3)
    x = rng.random(5)
    np.testing.assert_array_equal(forward_features(StackedModel((p,)), x), encode(p, x))


def test_zero_weights_propagate_half():
    layers = tuple(LayerParams(np.zeros((b, a)), np.zeros(b), np.zeros(a)) for a, b in ((4, 3), (3, 2)))
    np.testing.assert_array_equal(forward_features(StackedModel(layers), np.ones(4)), [0.5, 0.5])


def test_two_layer_composition(rng):
    m = random_model(rng)
    x = rng.random(5)
    manual = encode(m.layers[1], encode(m.layers[0], x))
    np.testing.assert_allclose(forward_features(m, x), manual, rtol=0, atol=1e-12)


def test_features_shape_error(rng):
    with pytest.raises(ShapeError):
        forward_features(random_model(rng), np.ones(4))


# -------------------------------------------------------------- softmax


def test_zero_classifier_is_uniform_with_low_tie_break(rng):
    m = StackedModel((random_layer(rng, 5, 3),)).with_classifier(4)
    probs, label = softmax_predict(m, rng.random(5))
    np.testing.assert_allclose(probs, [0.25] * 4, atol=1e-15)
    assert label == 0


def test_logits_zero_ln3(rng):
    m = StackedModel((random_layer(rng, 2, 2),), np.zeros((2, 2)), np.array([0.0, math.log(3.0)]))
    probs, label = softmax_predict(m, np.zeros(2))
    np.testing.assert_allclose(probs, [0.25, 0.75], atol=1e-15)
    assert label == 1


def test_softmax_matches_scalar_oracle(rng):
    m = random_model(rng)
    x = rng.random(5)
    feats = forward_features(m, x)
    z = [float(m.classifier_W[c] @ feats + m.classifier_b[c]) for c in range(3)]
    probs, _ = softmax_predict(m, x)
    np.testing.assert_allclose(probs, scalar_softmax(z), rtol=0, atol=1e-12)


def test_uninitialised_classifier(rng):
    with pytest.raises(StateError):
        softmax_predict(StackedModel((random_layer(rng, 3, 2),)), np.ones(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_probabilities_positive_and_normalised(seed):
    r = np.random.default_rng(seed)
    m = random_model(r)
    probs, _ = softmax_predict(m, r.random(5))
    assert np.all(probs > 0)
    assert abs(probs.sum() - 1.0) <= 1e-12


# ------------------------------------------------------------- finetune


def test_zero_learning_rate_leaves_model(rng):
    m = random_model(rng)
    X = rng.random((30, 5))
    y = rng.integers(0, 3, 30)
    rep = finetune(m, X, y, FineTuneConfig(lr=0.0, epochs=3, seed=1))
    assert rep.params.same_as(m)
    assert len(set(rep.extra["train_error"])) == 1


def test_classifier_gradient_matches_finite_differences(rng):
    m = random_model(rng)
    X = rng.random((8, 5))
    y = rng.integers(0, 3, 8)
    _, grads = supervised_gradient(m, X, y)
    arrays = _params_of(m)
    shapes = [a.shape for a in arrays]
    sizes = [a.size for a in arrays]
    flat = np.concatenate([a.ravel() for a in arrays])

    def f(theta):
        parts = np.split(theta, np.cumsum(sizes)[:-1])
        return mean_cross_entropy(_rebuild(m, [p.reshape(s) for p, s in zip(parts, shapes)]), X, y)

    fd = central_diff(f, flat)
    analytic = np.concatenate([g.ravel() for g in grads])
    assert rel_err(analytic[-sizes[-2] - sizes[-1]:], fd[-sizes[-2] - sizes[-1]:]) <= 1e-5
    assert rel_err(analytic, fd) <= 1e-5


def test_separable_blobs_reach_zero_training_error():
    X, y = blobs(make_rng(0), 100)
    X = (X - X.min(0)) / (X.max(0) - X.min(0))
    m = greedy_pretrain(X, [8], ObjectiveSpec(DAE, NoiseSpec.none()), TrainConfig(eta=0.05, epochs=5, seed=1))
    rep = finetune(m, X, y, FineTuneConfig(lr=0.5, epochs=200, batch_size=10, seed=1))
    assert min(rep.extra["train_error"]) == 0.0
    assert rep.extra["train_error"][-1] == 0.0


def test_finetune_keeps_decoder_bias(rng):
    m = random_model(rng)
    X = rng.random((20, 5))
    y = rng.integers(0, 3, 20)
    out = finetune(m, X, y, FineTuneConfig(lr=0.5, epochs=2, seed=1, dropout_rate=0.2)).params
    for a, b in zip(m.layers, out.layers):
        np.testing.assert_array_equal(a.b_x, b.b_x)
    assert not out.layers[0].same_as(m.layers[0])


def test_finetune_label_out_of_range(rng):
    m = random_model(rng)
    with pytest.raises(DataError):
        finetune(m, rng.random((4, 5)), np.array([0, 1, 2, 3]), FineTuneConfig(epochs=1))


def test_finetune_attaches_zero_classifier(rng):
    m = StackedModel((random_layer(rng, 5, 3),))
    rep = finetune(m, rng.random((6, 5)), np.array([0, 1, 0, 1, 0, 1]), FineTuneConfig(lr=0.0, epochs=1))
    assert rep.params.class_count == 2
    assert not rep.params.classifier_W.any()


def test_finetune_deterministic(rng):
    m = random_model(rng)
    X = rng.random((20, 5))
    y = rng.integers(0, 3, 20)
    cfg = FineTuneConfig(lr=0.3, epochs=3, seed=4, dropout_rate=0.2)
    assert finetune(m, X, y, cfg).params.same_as(finetune(m, X, y, cfg).params)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_small_full_batch_step_decreases_loss(seed):
    r = np.random.default_rng(seed)
    m = random_model(r)
    X = r.random((10, 5))
    y = r.integers(0, 3, 10)
    before = mean_cross_entropy(m, X, y)
    loss, grads = supervised_gradient(m, X, y)
    assert loss == pytest.approx(before, abs=1e-12)
    gnorm2 = sum(float(np.sum(g * g)) for g in grads)
    if gnorm2 < 1e-12:
        return
    eta = 1e-3
    stepped = _rebuild(m, [a - eta * g for a, g in zip(_params_of(m), grads)])
    after = mean_cross_entropy(stepped, X, y)
    assert after < before
    assert after - before == pytest.approx(-eta * gnorm2, rel=0.05)


def test_inverted_dropout_preserves_expected_preactivation():
    r = make_rng(0)
    a = np.linspace(0.1, 1.0, 6)
    w = np.array([0.5, -1.0, 2.0, 0.3, -0.7, 1.1])
    draws = np.array([(a * dropout_mask(r, 6, 0.2)) @ w for _ in range(10_000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - a @ w) <= 3 * se


def test_dropout_rate_bounds():
    with pytest.raises(Exception):
        FineTuneConfig(dropout_rate=1.0)


# ---------------------------------------------------------------- errors


def test_error_rate_perfect(rng):
    m = random_model(rng)
    X = rng.random((20, 5))
    assert evaluate_error_rate(m, X, predict(m, X)) == 0.0


def test_error_rate_constant_prediction(rng):
    m = StackedModel((random_layer(rng, 5, 3),)).with_classifier(2)
    y = np.array([0, 1] * 10)
    assert evaluate_error_rate(m, rng.random((20, 5)), y) == 0.5


def test_error_rate_hand_count(rng):
    m = random_model(rng)
    X = rng.random((100, 5))
    y = rng.integers(0, 3, 100)
    wrong = 0
    for x, t in zip(X, y):
        if softmax_predict(m, x)[1] != t:
            wrong += 1
    assert evaluate_error_rate(m, X, y) == wrong / 100


def test_error_rate_label_shape(rng):
    with pytest.raises(ShapeError):
        evaluate_error_rate(random_model(rng), rng.random((4, 5)), np.zeros(3, dtype=int))
