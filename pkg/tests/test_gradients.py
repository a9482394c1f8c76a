import numpy as np
import pytest

from conftest import central_diff, random_layer, rel_err
from ddae.autoencoder import (
    AE,
    CAE,
    DAE,
    DDAE_COM,
    DDAE_SEP,
    REHR,
    NoiseSpec,
    ObjectiveSpec,
    draw_noise,
    encode,
    objective_value,
    value_and_gradient,
)
from ddae.numerics import make_rng

CASES = [
    (AE, None),
    (DAE, None),
    (CAE, None),
    (REHR, None),
    (DDAE_COM, None),
    (DDAE_SEP, 1),
    (DDAE_SEP, 2),
]
DECODERS = [("sigmoid", "cross_entropy"), ("sigmoid", "squared"), ("identity", "squared")]


def make_spec(kind, loss, inp="masking:20", hid="masking:25"):
    return ObjectiveSpec(kind, NoiseSpec.parse(inp), NoiseSpec.parse(hid), lam=0.7, alpha=0.3, recon_loss=loss)


def fd_gradient(p, X, spec, noise, phase):
    """Central differences of the objective with the noise draw and the
    hidden-reconstruction target both held fixed."""
    target = encode(p, noise.input.apply(X))

    def f(theta):
        return objective_value(p.from_flat(theta), X, spec, noise, hidden_target=target, phase=phase)

    return central_diff(f, p.flat())


@pytest.mark.parametrize("kind,phase", CASES)
@pytest.mark.parametrize("act,loss", DECODERS)
def test_gradient_matches_finite_differences(kind, phase, act, loss):
    r = np.random.default_rng(hash((kind, phase, act, loss)) % 2**32)
    p = random_layer(r, 5, 4, dec_act=act)
    X = r.random((3, 5))
    spec = make_spec(kind, loss)
    noise = draw_noise(make_rng(7), spec, X.shape, 4)
    _, g = value_and_gradient(p, X, spec, noise, phase)
    assert rel_err(g.flat(), fd_gradient(p, X, spec, noise, phase)) <= 1e-5


@pytest.mark.parametrize("kind", [REHR, DDAE_COM])
def test_gradient_with_gaussian_noise(kind):
    r = np.random.default_rng(3)
    p = random_layer(r, 4, 3)
    X = r.random((4, 4))
    spec = make_spec(kind, "cross_entropy", "gaussian:0.1", "gaussian:0.2")
    noise = draw_noise(make_rng(5), spec, X.shape, 3)
    _, g = value_and_gradient(p, X, spec, noise)
    assert rel_err(g.flat(), fd_gradient(p, X, spec, noise, None)) <= 1e-5


def test_ddae_sep_unphased_gradient_is_sum_of_phases():
    r = np.random.default_rng(4)
    p = random_layer(r, 4, 3)
    X = r.random((5, 4))
    spec = make_spec(DDAE_SEP, "cross_entropy")
    noise = draw_noise(make_rng(1), spec, X.shape, 3)
    total = value_and_gradient(p, X, spec, noise)[1]
    parts = value_and_gradient(p, X, spec, noise, 1)[1] + value_and_gradient(p, X, spec, noise, 2)[1]
    np.testing.assert_allclose(total.flat(), parts.flat(), rtol=1e-12, atol=1e-14)


# ------------------------------------------------------ untied oracle


def _csig(t):
    return 1.0 / (1.0 + np.exp(-t))


def untied_value(We, Wd, bh, bx, X, spec, noise, target, dec_act, loss, phase=None):
    """Objective with the encoder weight ``We`` (D_h x D_x) and the decoder
    weight ``Wd`` (D_x x D_h) as separate arguments. Complex-safe."""
    kind = spec.kind
    xt = noise.input.apply(X)
    h = _csig(xt @ We.T + bh)

    def dec(v):
        a = v @ Wd.T + bx
        return _csig(a) if dec_act == "sigmoid" else a

    total = 0.0
    if kind in (AE, DAE, CAE, DDAE_COM) or (kind == DDAE_SEP and phase == 1):
        y = dec(h)
        if loss == "cross_entropy":
            total = total - np.sum(X * np.log(y) + (1 - X) * np.log(1 - y))
        else:
            total = total + np.sum((X - y) ** 2)
        if kind == CAE:
            total = total + spec.alpha * np.sum(((h * (1 - h)) ** 2) @ np.sum(We * We, axis=1))
    if kind in (REHR, DDAE_COM) or (kind == DDAE_SEP and phase == 2):
        ht = noise.hidden.apply(target)
        hs = _csig(dec(ht) @ We.T + bh)
        per = np.sum((target - hs) ** 2, axis=1)
        total = total + (spec.lam * np.sum(np.sqrt(per)) if kind == DDAE_COM else np.sum(per))
    return total


def complex_step(f, a, step=1e-30):
    g = np.zeros(a.shape)
    for idx in np.ndindex(a.shape):
        z = a.astype(np.complex128)
        z[idx] += 1j * step
        g[idx] = np.imag(f(z)) / step
    return g


@pytest.mark.parametrize("kind,phase", CASES)
@pytest.mark.parametrize("act,loss", DECODERS)
def test_tied_gradient_equals_encoder_plus_decoder_roles(kind, phase, act, loss):
    r = np.random.default_rng(11)
    p = random_layer(r, 5, 4, dec_act=act)
    X = r.random((3, 5))
    spec = make_spec(kind, loss)
    noise = draw_noise(make_rng(2), spec, X.shape, 4)
    target = encode(p, noise.input.apply(X))
    _, g = value_and_gradient(p, X, spec, noise, phase)

    W, Wd = p.W, p.W.T.copy()
    enc = complex_step(lambda z: untied_value(z, Wd, p.b_h, p.b_x, X, spec, noise, target, act, loss, phase), W)
    dec = complex_step(lambda z: untied_value(W, z, p.b_h, p.b_x, X, spec, noise, target, act, loss, phase), Wd)
    assert rel_err(g.dW, enc + dec.T) <= 1e-8
    gbh = complex_step(lambda z: untied_value(W, Wd, z, p.b_x, X, spec, noise, target, act, loss, phase), p.b_h)
    gbx = complex_step(lambda z: untied_value(W, Wd, p.b_h, z, X, spec, noise, target, act, loss, phase), p.b_x)
    assert rel_err(g.db_h, gbh) <= 1e-8
    assert rel_err(g.db_x, gbx) <= 1e-8
