"""Mini-batch SGD with momentum for every auto-encoder objective.

Each run splits its seed into independent streams (batch order, input
corruption, hidden corruption, initialisation, evaluation). Objectives that
do not use the hidden term therefore see exactly the same input noise as
those that do. This is what makes DDAE-COM at ``lam=0`` and DDAE-SEP at
``eta2=0`` replay plain DAE training bit for bit.

Update rule, per parameter array::

    v <- mu_t * v - eta * grad
    theta <- theta + v

with ``mu_t`` interpolated linearly across epochs.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import (
    AE,
    CAE,
    DAE,
    DDAE_COM,
    DDAE_SEP,
    REHR,
    draw_noise,
    init_layer,
    objective_value,
    value_and_gradient,
)
from .errors import DataError, DivergenceError, ParameterError, ShapeError
from .numerics import as_matrix

_SHUFFLE, _INPUT, _HIDDEN, _INIT, _EVAL_INPUT, _EVAL_HIDDEN = range(6)


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.1
    batch_size: int = 20
    epochs: int = 10
    momentum_start: float = 0.0
    momentum_end: float = 0.0
    seed: int = 0
    shuffle: bool = True
    # early stopping on a validation objective; None disables it
    patience: int = None

    def __post_init__(self):
        for name in ("eta", "eta1", "eta2"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if not 0.0 <= self.momentum_start <= self.momentum_end < 1.0:
            raise ParameterError("need 0 <= momentum_start <= momentum_end < 1")
        if self.patience is not None and self.patience < 1:
            raise ParameterError("patience must be >= 1")


@dataclass
class TrainReport:
    objectives: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    params: object = None
    seed: int = 0
    initial_objective: float = float("nan")
    valid_objectives: list = field(default_factory=list)
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def epochs_run(self):
        return len(self.objectives)


def momentum_at(epoch, cfg):
    if not 0 <= epoch < cfg.epochs:
        raise ParameterError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if cfg.epochs == 1:
        return cfg.momentum_start
    frac = epoch / (cfg.epochs - 1)
    return cfg.momentum_start + (cfg.momentum_end - cfg.momentum_start) * frac


def seed_streams(seed):
    """Independent child seed sequences for one training run."""
    return np.random.SeedSequence(seed).spawn(6)


def _gen(ss):
    return np.random.Generator(np.random.PCG64(ss))


def initial_params(seed, n_visible, n_hidden, dec_act="sigmoid"):
    """The initialisation a run with this seed starts from."""
    return init_layer(_gen(seed_streams(seed)[_INIT]), n_visible, n_hidden, dec_act)


def evaluate_objective(p, data, spec, seed, phase=None):
    """Mean per-sample objective on a noise draw fixed by ``seed``.

    The same draw is reused every epoch, so the curve only moves when the
    parameters do.
    """
    streams = seed_streams(seed)
    noise = draw_noise(
        _gen(streams[_EVAL_INPUT]), spec, data.shape, p.n_hidden, _gen(streams[_EVAL_HIDDEN])
    )
    return objective_value(p, data, spec, noise, phase=phase) / data.shape[0]


class _Momentum:
    def __init__(self, p):
        self.v = [np.zeros_like(p.W), np.zeros_like(p.b_h), np.zeros_like(p.b_x)]

    def step(self, p, grad, mu, eta, epoch):
        out = []
        for i, (theta, g) in enumerate(zip((p.W, p.b_h, p.b_x), (grad.dW, grad.db_h, grad.db_x))):
            self.v[i] = mu * self.v[i] - eta * g
            out.append(theta + self.v[i])
        if not all(np.all(np.isfinite(a)) for a in out):
            raise DivergenceError(f"parameters became non-finite in epoch {epoch}", epoch=epoch)
        return p.with_arrays(*out)


def _prepare(data, spec, kinds, params):
    if spec.kind not in kinds:
        raise ParameterError(f"objective {spec.kind} cannot be trained here (expects {kinds})")
    data = as_matrix(data, "training data")
    if data.shape[0] == 0 or data.shape[1] == 0:
        raise DataError("training data is empty")
    if params is None:
        raise ParameterError("initial parameters are required")
    if params.n_visible != data.shape[1]:
        raise ShapeError(f"data has {data.shape[1]} columns, layer expects {params.n_visible}")
    return data


def _run(data, spec, cfg, params, phases, valid):
    streams = seed_streams(cfg.seed)
    order_rng = _gen(streams[_SHUFFLE])
    input_rng = _gen(streams[_INPUT])
    hidden_rng = _gen(streams[_HIDDEN])
    n = data.shape[0]
    p = params
    velocity = {phase: _Momentum(p) for phase, _ in phases}
    report = TrainReport(seed=cfg.seed)
    report.initial_objective = evaluate_objective(p, data, spec, cfg.seed)
    best, stale = np.inf, 0
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            mu = momentum_at(epoch, cfg)
            order = order_rng.permutation(n) if cfg.shuffle else np.arange(n)
            for start in range(0, n, cfg.batch_size):
                batch = data[order[start : start + cfg.batch_size]]
                noise = draw_noise(input_rng, spec, batch.shape, p.n_hidden, hidden_rng)
                for phase, eta in phases:
                    _, grad = value_and_gradient(p, batch, spec, noise, phase)
                    p = velocity[phase].step(p, grad, mu, eta, epoch)
            obj = evaluate_objective(p, data, spec, cfg.seed)
            if not np.isfinite(obj):
                raise DivergenceError(f"objective became non-finite in epoch {epoch}", epoch=epoch)
            report.objectives.append(obj)
            report.seconds.append(time.perf_counter() - t0)
            if valid is not None:
                vobj = evaluate_objective(p, valid, spec, cfg.seed)
                report.valid_objectives.append(vobj)
                if cfg.patience is not None:
                    if vobj < best:
                        best, stale = vobj, 0
                    else:
                        stale += 1
                        if stale >= cfg.patience:
                            report.stopped_early = True
                            break
    report.params = p
    return report


def _start(params, data, cfg, n_hidden, dec_act):
    if params is not None:
        return params
    if n_hidden is None:
        raise ParameterError("give either initial params or n_hidden")
    return initial_params(cfg.seed, np.asarray(data).shape[1], n_hidden, dec_act)


def train_plain(data, spec, cfg, params=None, n_hidden=None, dec_act="sigmoid", valid=None):
    """Plain SGD on an AE, DAE, CAE or REHR objective."""
    params = _start(params, data, cfg, n_hidden, dec_act)
    data = _prepare(data, spec, (AE, DAE, CAE, REHR), params)
    return _run(data, spec, cfg, params, [(None, cfg.eta)], valid)


def train_ddae_com(data, spec, cfg, params=None, n_hidden=None, dec_act="sigmoid", valid=None):
    """Joint training of input and hidden reconstruction with step ``cfg.eta``."""
    params = _start(params, data, cfg, n_hidden, dec_act)
    data = _prepare(data, spec, (DDAE_COM,), params)
    return _run(data, spec, cfg, params, [(None, cfg.eta)], valid)


def train_ddae_sep(data, spec, cfg, params=None, n_hidden=None, dec_act="sigmoid", valid=None):
    """Two updates per mini-batch: input reconstruction (``eta1``), then
    hidden reconstruction (``eta2``) against targets recomputed with the
    freshly updated weights. Each phase keeps its own momentum buffer.
    """
    params = _start(params, data, cfg, n_hidden, dec_act)
    data = _prepare(data, spec, (DDAE_SEP,), params)
    return _run(data, spec, cfg, params, [(1, cfg.eta1), (2, cfg.eta2)], valid)


def train(data, spec, cfg, params=None, n_hidden=None, dec_act="sigmoid", valid=None):
    """Dispatch on ``spec.kind``."""
    fn = {DDAE_COM: train_ddae_com, DDAE_SEP: train_ddae_sep}.get(spec.kind, train_plain)
    return fn(data, spec, cfg, params=params, n_hidden=n_hidden, dec_act=dec_act, valid=valid)
