"""A single tied-weight auto-encoder layer and all of its training objectives.

Row convention: a batch is an ``m x D_x`` array, ``W`` is ``D_h x D_x``, so

    encode:  h  = S_f(x W^T + b_h)
    decode:  x* = S_g(h W + b_x)

Objectives (``ObjectiveSpec.kind``):

    AE        sum L(x, g(f(x)))
    DAE       sum L(x, g(f(x~)))
    CAE       sum L(x, g(f(x))) + alpha * ||J_f(x)||_F^2
    REHR      sum ||h - f(g(h~))||^2,            h = f(x~)
    DDAE_COM  sum L(x, g(f(x~))) + lam * sqrt(||h - f(g(h~))||^2)
    DDAE_SEP  phase 1 is the DAE term, phase 2 the REHR term

The expectation over corruption is replaced by one draw per sample. A draw
is materialised as a :class:`Corruption` (mask and additive offset), so the
value and the gradient of a step can be replayed on exactly the same noise.

In the hidden-reconstruction term the target ``h`` (and therefore ``h~``)
is held constant for differentiation; gradients flow through ``f(g(.))``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, ShapeError, UnsupportedConfigError
from .numerics import (
    CE_CLAMP,
    as_matrix,
    check_finite,
    cross_entropy_loss,
    sigmoid,
    squared_loss,
)

SIGMOID = "sigmoid"
IDENTITY = "identity"
ACTIVATIONS = (SIGMOID, IDENTITY)

AE, DAE, CAE, REHR, DDAE_COM, DDAE_SEP = "AE", "DAE", "CAE", "REHR", "DDAE_COM", "DDAE_SEP"
KINDS = (AE, DAE, CAE, REHR, DDAE_COM, DDAE_SEP)
HIDDEN_KINDS = (REHR, DDAE_COM, DDAE_SEP)

SQUARED = "squared"
CROSS_ENTROPY = "cross_entropy"

# keeps d sqrt(L)/dL bounded as L -> 0
SQRT_EPS = 1e-12


def _activate(name, a):
    return sigmoid(a) if name == SIGMOID else a


def _activation_slope(name, out):
    """Derivative of the activation expressed through its output."""
    return out * (1.0 - out) if name == SIGMOID else np.ones_like(out)


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LayerParams:
    W: np.ndarray
    b_h: np.ndarray
    b_x: np.ndarray
    enc_act: str = SIGMOID
    dec_act: str = SIGMOID

    def __post_init__(self):
        W = _frozen(self.W)
        b_h = _frozen(self.b_h)
        b_x = _frozen(self.b_x)
        if W.ndim != 2:
            raise ShapeError(f"W must be 2-D, got shape {W.shape}")
        if b_h.shape != (W.shape[0],) or b_x.shape != (W.shape[1],):
            raise ShapeError(
                f"bias shapes {b_h.shape}, {b_x.shape} do not fit W of shape {W.shape}"
            )
        for name in (self.enc_act, self.dec_act):
            if name not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {name!r}")
        for a, what in ((W, "W"), (b_h, "b_h"), (b_x, "b_x")):
            check_finite(a, what)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b_h", b_h)
        object.__setattr__(self, "b_x", b_x)

    @property
    def n_visible(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W.shape[0]

    def with_arrays(self, W, b_h, b_x):
        return replace(self, W=W, b_h=b_h, b_x=b_x)

    def flat(self):
        return np.concatenate([self.W.ravel(), self.b_h, self.b_x])

    def from_flat(self, theta):
        dh, dx = self.W.shape
        n = dh * dx
        return self.with_arrays(
            theta[:n].reshape(dh, dx), theta[n : n + dh], theta[n + dh : n + dh + dx]
        )

    def same_as(self, other, tol=0.0):
        if self.W.shape != other.W.shape:
            return False
        if (self.enc_act, self.dec_act) != (other.enc_act, other.dec_act):
            return False
        return all(
            np.max(np.abs(a - b), initial=0.0) <= tol
            for a, b in ((self.W, other.W), (self.b_h, other.b_h), (self.b_x, other.b_x))
        )


def init_layer(rng, n_visible, n_hidden, dec_act=SIGMOID, enc_act=SIGMOID):
    """Uniform weights in [-1/sqrt(D_x), 1/sqrt(D_x)], zero biases."""
    r = 1.0 / np.sqrt(n_visible)
    W = rng.uniform(-r, r, size=(n_hidden, n_visible))
    return LayerParams(W, np.zeros(n_hidden), np.zeros(n_visible), enc_act, dec_act)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "masking", "gaussian"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        level = float(self.level)
        if self.kind == "masking" and not 0.0 <= level <= 100.0:
            raise ParameterError(f"masking percentage must lie in [0, 100], got {level}")
        if self.kind == "gaussian" and level < 0.0:
            raise ParameterError(f"gaussian sigma must be >= 0, got {level}")
        object.__setattr__(self, "level", 0.0 if self.kind == "none" else level)

    @classmethod
    def none(cls):
        return cls("none", 0.0)

    @classmethod
    def masking(cls, percent):
        return cls("masking", percent)

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", sigma)

    @classmethod
    def parse(cls, text):
        """Parse ``none``, ``masking:25`` or ``gaussian:0.1``."""
        text = text.strip().lower()
        if text == "none":
            return cls.none()
        kind, sep, value = text.partition(":")
        if not sep:
            raise ParameterError(f"noise must look like 'masking:25' or 'gaussian:0.1', got {text!r}")
        try:
            return cls(kind, float(value))
        except ValueError as exc:
            raise ParameterError(f"bad noise level in {text!r}") from exc

    def __str__(self):
        return "none" if self.kind == "none" else f"{self.kind}:{self.level:g}"


@dataclass(frozen=True)
class Corruption:
    """One realised draw of q(v~|v): ``v~ = v * mask + offset``."""

    mask: np.ndarray = None
    offset: np.ndarray = None

    def apply(self, v):
        out = np.asarray(v, dtype=np.float64)
        if self.mask is not None:
            out = out * self.mask
        if self.offset is not None:
            out = out + self.offset
        return out


def draw_corruption(rng, spec, shape):
    if spec.kind == "masking":
        return Corruption(mask=(rng.random(shape) >= spec.level / 100.0).astype(np.float64))
    if spec.kind == "gaussian":
        return Corruption(offset=spec.level * rng.standard_normal(shape))
    return Corruption()


def corrupt(rng, v, spec):
    v = np.asarray(v, dtype=np.float64)
    return draw_corruption(rng, spec, v.shape).apply(v)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    input_noise: NoiseSpec = field(default_factory=NoiseSpec.none)
    hidden_noise: NoiseSpec = field(default_factory=lambda: NoiseSpec.masking(25))
    lam: float = 0.0
    alpha: float = 0.0
    recon_loss: str = "auto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown objective kind {self.kind!r}")
        if self.lam < 0 or self.alpha < 0:
            raise ParameterError("lam and alpha must be >= 0")
        if self.recon_loss not in ("auto", SQUARED, CROSS_ENTROPY):
            raise ParameterError(f"unknown reconstruction loss {self.recon_loss!r}")
        if self.kind in (AE, CAE):
            object.__setattr__(self, "input_noise", NoiseSpec.none())
        if self.kind == CAE:
            object.__setattr__(self, "hidden_noise", NoiseSpec.none())

    def loss_for(self, params):
        if self.recon_loss != "auto":
            return self.recon_loss
        return CROSS_ENTROPY if params.dec_act == SIGMOID else SQUARED

    @property
    def uses_hidden(self):
        return self.kind in HIDDEN_KINDS


@dataclass(frozen=True)
class Noise:
    """Input and hidden corruption for one batch."""

    input: Corruption = field(default_factory=Corruption)
    hidden: Corruption = field(default_factory=Corruption)


def draw_noise(rng, spec, batch_shape, n_hidden, hidden_rng=None):
    """Draw the input corruption, then (for kinds that need it) the hidden one.

    ``hidden_rng`` lets training keep the hidden draws on their own stream so
    objectives that ignore the hidden term consume identical input noise.
    """
    inp = draw_corruption(rng, spec.input_noise, batch_shape)
    hid = Corruption()
    if spec.uses_hidden:
        hid = draw_corruption(
            rng if hidden_rng is None else hidden_rng,
            spec.hidden_noise,
            (batch_shape[0], n_hidden),
        )
    return Noise(inp, hid)


@dataclass(frozen=True)
class Gradient:
    dW: np.ndarray
    db_h: np.ndarray
    db_x: np.ndarray

    def flat(self):
        return np.concatenate([self.dW.ravel(), self.db_h, self.db_x])

    def __add__(self, other):
        return Gradient(self.dW + other.dW, self.db_h + other.db_h, self.db_x + other.db_x)


def encode(p, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.n_visible:
        raise ShapeError(f"input has {x.shape[-1]} components, layer expects {p.n_visible}")
    return _activate(p.enc_act, x @ p.W.T + p.b_h)


def decode(p, h):
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != p.n_hidden:
        raise ShapeError(f"hidden vector has {h.shape[-1]} components, layer expects {p.n_hidden}")
    return _activate(p.dec_act, h @ p.W + p.b_x)


def reconstruct(p, x):
    return decode(p, encode(p, x))


def recon_loss(kind, x, y):
    return cross_entropy_loss(x, y) if kind == CROSS_ENTROPY else squared_loss(x, y)


def _recon_delta(kind, dec_act, x, y):
    """dL/d(decoder pre-activation), one row per sample."""
    if kind == CROSS_ENTROPY:
        if dec_act == SIGMOID:
            return y - x
        yc = np.clip(y, CE_CLAMP, 1.0 - CE_CLAMP)
        inside = (y > CE_CLAMP) & (y < 1.0 - CE_CLAMP)
        return np.where(inside, (yc - x) / (yc * (1.0 - yc)), 0.0)
    return 2.0 * (y - x) * _activation_slope(dec_act, y)


def _require_sigmoid_encoder(p):
    if p.enc_act != SIGMOID:
        raise UnsupportedConfigError("the closed-form contractive penalty needs a sigmoid encoder")


def penalty_rows(p, h):
    """Per-sample ||J_f(x)||_F^2 from hidden activations ``h`` (m x D_h)."""
    col = np.sum(p.W * p.W, axis=1)
    s = (h * (1.0 - h)) ** 2
    return s @ col


def cae_penalty(p, x):
    """Closed-form squared Frobenius norm of the encoder Jacobian at ``x``."""
    _require_sigmoid_encoder(p)
    return penalty_rows(p, encode(p, x))


def _check_batch(p, batch):
    batch = as_matrix(batch, "batch")
    if batch.shape[1] != p.n_visible:
        raise ShapeError(f"batch has {batch.shape[1]} columns, layer expects {p.n_visible}")
    return batch


class _Pass:
    """Forward quantities of one objective evaluation, kept for backprop."""

    def __init__(self, p, batch, spec, noise, hidden_target=None, phase=None):
        self.p, self.x, self.spec, self.phase = p, batch, spec, phase
        self.loss = spec.loss_for(p)
        kind = spec.kind
        self.want_recon = kind in (AE, DAE, CAE, DDAE_COM) or (kind == DDAE_SEP and phase != 2)
        self.want_rehr = kind in (REHR, DDAE_COM) or (kind == DDAE_SEP and phase != 1)
        if kind == CAE:
            _require_sigmoid_encoder(p)

        self.xt = noise.input.apply(batch)
        self.h = encode(p, self.xt)
        m = batch.shape[0]
        self.recon = np.zeros(m)
        self.penalty = np.zeros(m)
        self.rehr = np.zeros(m)
        if self.want_recon:
            self.y = decode(p, self.h)
            self.recon = recon_loss(self.loss, batch, self.y)
            if kind == CAE:
                self.penalty = penalty_rows(p, self.h)
        if self.want_rehr:
            target = self.h if hidden_target is None else np.asarray(hidden_target, dtype=np.float64)
            self.target = target
            self.ht = noise.hidden.apply(target)
            self.xbar = decode(p, self.ht)
            self.hstar = encode(p, self.xbar)
            self.rehr = squared_loss(target, self.hstar)

    def rehr_weights(self):
        if self.spec.kind == DDAE_COM:
            return self.spec.lam / (2.0 * np.sqrt(self.rehr + SQRT_EPS))
        return np.ones_like(self.rehr)

    def per_sample(self):
        kind = self.spec.kind
        if kind == CAE:
            return self.recon + self.spec.alpha * self.penalty
        if kind == DDAE_COM:
            return self.recon + self.spec.lam * np.sqrt(self.rehr)
        if kind == REHR:
            return self.rehr
        if kind == DDAE_SEP:
            if self.phase == 1:
                return self.recon
            if self.phase == 2:
                return self.rehr
            return self.recon + self.rehr
        return self.recon

    def value(self):
        return float(np.sum(self.per_sample()))

    def gradient(self):
        p = self.p
        W = p.W
        dW = np.zeros_like(W)
        db_h = np.zeros(p.n_hidden)
        db_x = np.zeros(p.n_visible)
        if self.want_recon:
            dc = _recon_delta(self.loss, p.dec_act, self.x, self.y)
            db_x = db_x + dc.sum(axis=0)
            dW = dW + self.h.T @ dc
            da = (dc @ W.T) * _activation_slope(p.enc_act, self.h)
            if self.spec.kind == CAE and self.spec.alpha != 0.0:
                alpha = self.spec.alpha
                hh = self.h * (1.0 - self.h)
                col = np.sum(W * W, axis=1)
                da = da + alpha * 2.0 * hh * hh * (1.0 - 2.0 * self.h) * col
                dW = dW + alpha * 2.0 * W * np.sum(hh * hh, axis=0)[:, None]
            db_h = db_h + da.sum(axis=0)
            dW = dW + da.T @ self.xt
        if self.want_rehr:
            w = self.rehr_weights()
            da2 = 2.0 * (self.hstar - self.target) * _activation_slope(p.enc_act, self.hstar) * w[:, None]
            db_h = db_h + da2.sum(axis=0)
            dW = dW + da2.T @ self.xbar
            dc2 = (da2 @ W) * _activation_slope(p.dec_act, self.xbar)
            db_x = db_x + dc2.sum(axis=0)
            dW = dW + self.ht.T @ dc2
        return Gradient(dW, db_h, db_x)


def objective_value(p, batch, spec, noise, hidden_target=None, phase=None):
    """Objective on a fixed noise draw.

    With ``hidden_target`` the REHR target is held at the given array; this
    is the function whose derivative :func:`value_and_gradient` returns.
    """
    batch = _check_batch(p, batch)
    return _Pass(p, batch, spec, noise, hidden_target, phase).value()


def per_sample_terms(p, batch, spec, noise, phase=None):
    """Per-sample (recon, penalty, rehr) arrays on a fixed noise draw."""
    batch = _check_batch(p, batch)
    fp = _Pass(p, batch, spec, noise, phase=phase)
    return fp.recon, fp.penalty, fp.rehr


def value_and_gradient(p, batch, spec, noise, phase=None):
    batch = _check_batch(p, batch)
    fp = _Pass(p, batch, spec, noise, phase=phase)
    return fp.value(), fp.gradient()


def objective_gradient(rng, p, batch, spec, phase=None, hidden_rng=None):
    """Draw one corruption per sample and return the analytic gradient.

    For ``DDAE_SEP`` pick ``phase=1`` (input reconstruction) or ``phase=2``
    (hidden reconstruction); ``None`` differentiates their sum.
    """
    batch = _check_batch(p, batch)
    noise = draw_noise(rng, spec, batch.shape, p.n_hidden, hidden_rng)
    return value_and_gradient(p, batch, spec, noise, phase)[1]


def _loss_with_rng(rng, p, batch, spec, phase=None):
    batch = _check_batch(p, batch)
    noise = draw_noise(rng, spec, batch.shape, p.n_hidden)
    return objective_value(p, batch, spec, noise, phase=phase)


def dae_loss(rng, p, batch, spec):
    if spec.kind not in (AE, DAE):
        raise ParameterError(f"dae_loss needs an AE or DAE objective, got {spec.kind}")
    return _loss_with_rng(rng, p, batch, spec)


def cae_loss(p, batch, spec):
    if spec.kind != CAE:
        raise ParameterError(f"cae_loss needs a CAE objective, got {spec.kind}")
    batch = _check_batch(p, batch)
    return objective_value(p, batch, spec, Noise())


def rehr_loss(rng, p, batch, spec):
    """Hidden-reconstruction error alone, whatever the objective kind."""
    batch = _check_batch(p, batch)
    noise = draw_noise(rng, replace(spec, kind=REHR), batch.shape, p.n_hidden)
    return objective_value(p, batch, replace(spec, kind=REHR), noise)


def ddae_com_loss(rng, p, batch, spec):
    if spec.kind != DDAE_COM:
        raise ParameterError(f"ddae_com_loss needs a DDAE_COM objective, got {spec.kind}")
    return _loss_with_rng(rng, p, batch, spec)


def ddae_sep_loss(rng, p, batch, spec):
    """Sum of both separate-training objectives on one draw."""
    if spec.kind != DDAE_SEP:
        raise ParameterError(f"ddae_sep_loss needs a DDAE_SEP objective, got {spec.kind}")
    return _loss_with_rng(rng, p, batch, spec)


def objective_loss(rng, p, batch, spec, phase=None):
    """Value of any objective kind under a fresh draw from ``rng``."""
    return _loss_with_rng(rng, p, batch, spec, phase)
