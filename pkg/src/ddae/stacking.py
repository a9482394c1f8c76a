"""Greedy layer-wise stacks with a softmax classifier on top.

Pretraining feeds each layer the clean hidden codes of the layer below.
Fine-tuning backpropagates the mean softmax cross-entropy through every
encoder and the classifier; decoder biases are left alone. Dropout is the
inverted variant, so prediction never rescales anything.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .autoencoder import SIGMOID, encode
from .errors import DataError, DivergenceError, ParameterError, ShapeError, StateError
from .numerics import as_matrix, make_rng, softmax
from .training import TrainReport, momentum_at, train


def derive_seed(seed, *keys):
    """Deterministic 63-bit child seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass(frozen=True, eq=False)
class StackedModel:
    layers: tuple
    classifier_W: np.ndarray = None
    classifier_b: np.ndarray = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("a stacked model needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].n_visible != layers[k - 1].n_hidden:
                raise ShapeError(
                    f"layer {k} expects {layers[k].n_visible} inputs but layer {k - 1} "
                    f"produces {layers[k - 1].n_hidden}"
                )
        object.__setattr__(self, "layers", layers)
        if (self.classifier_W is None) != (self.classifier_b is None):
            raise StateError("classifier weights and bias must be set together")
        if self.classifier_W is not None:
            Wc = np.array(self.classifier_W, dtype=np.float64)
            bc = np.array(self.classifier_b, dtype=np.float64)
            if Wc.ndim != 2 or Wc.shape[1] != layers[-1].n_hidden or bc.shape != (Wc.shape[0],):
                raise ShapeError(
                    f"classifier shapes {Wc.shape}, {bc.shape} do not fit top width "
                    f"{layers[-1].n_hidden}"
                )
            Wc.setflags(write=False)
            bc.setflags(write=False)
            object.__setattr__(self, "classifier_W", Wc)
            object.__setattr__(self, "classifier_b", bc)

    @property
    def n_inputs(self):
        return self.layers[0].n_visible

    @property
    def n_top(self):
        return self.layers[-1].n_hidden

    @property
    def has_classifier(self):
        return self.classifier_W is not None

    @property
    def class_count(self):
        return 0 if self.classifier_W is None else self.classifier_W.shape[0]

    def with_classifier(self, n_classes):
        """Attach a zero-initialised classifier head."""
        if n_classes < 1:
            raise ParameterError("need at least one class")
        return replace(
            self,
            classifier_W=np.zeros((n_classes, self.n_top)),
            classifier_b=np.zeros(n_classes),
        )

    def same_as(self, other, tol=0.0):
        if len(self.layers) != len(other.layers) or self.class_count != other.class_count:
            return False
        if not all(a.same_as(b, tol) for a, b in zip(self.layers, other.layers)):
            return False
        if self.has_classifier:
            return (
                np.max(np.abs(self.classifier_W - other.classifier_W), initial=0.0) <= tol
                and np.max(np.abs(self.classifier_b - other.classifier_b), initial=0.0) <= tol
            )
        return True


@dataclass(frozen=True)
class FineTuneConfig:
    lr: float = 0.1
    epochs: int = 20
    batch_size: int = 20
    dropout_rate: float = 0.0
    momentum_start: float = 0.0
    momentum_end: float = 0.0
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.lr < 0:
            raise ParameterError("lr must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.momentum_start <= self.momentum_end < 1.0:
            raise ParameterError("need 0 <= momentum_start <= momentum_end < 1")


def greedy_pretrain(data, layer_sizes, spec, cfg, dec_act=SIGMOID, on_layer=None):
    """Train one layer at a time; layer k+1 sees encode_k(...encode_1(x)).

    Layer 0 uses ``cfg.seed`` itself so a one-layer stack matches a direct
    call to the trainer. ``on_layer(index, report, inputs)`` is invoked
    after each layer finishes.
    """
    if not layer_sizes:
        raise ParameterError("layer_sizes must be non-empty")
    inputs = as_matrix(data, "training data")
    layers = []
    for k, size in enumerate(layer_sizes):
        layer_cfg = cfg if k == 0 else replace(cfg, seed=derive_seed(cfg.seed, k))
        # decoders above the first layer reconstruct sigmoid codes in (0, 1)
        act = dec_act if k == 0 else SIGMOID
        try:
            report = train(inputs, spec, layer_cfg, n_hidden=size, dec_act=act)
        except DivergenceError as exc:
            raise DivergenceError(f"layer {k}: {exc}", epoch=exc.epoch, layer=k) from exc
        except DataError as exc:
            raise type(exc)(f"layer {k}: {exc}") from exc
        layers.append(report.params)
        if on_layer is not None:
            on_layer(k, report, inputs)
        inputs = encode(report.params, inputs)
    return StackedModel(tuple(layers))


def _check_input(m, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != m.n_inputs:
        raise ShapeError(f"input has {X.shape[-1]} components, model expects {m.n_inputs}")
    return X


def forward_features(m, x):
    """Top-layer code; no corruption, no dropout. Accepts a vector or a batch."""
    h = _check_input(m, x)
    for layer in m.layers:
        h = encode(layer, h)
    return h


def predict_proba(m, X):
    if not m.has_classifier:
        raise StateError("classifier is not initialised")
    return softmax(forward_features(m, X) @ m.classifier_W.T + m.classifier_b)


def softmax_predict(m, x):
    """(probabilities, label) for one sample; ties go to the lowest index."""
    probs = predict_proba(m, as_vector_input(x))
    return probs, int(np.argmax(probs))


def as_vector_input(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected one sample as a 1-D vector, got shape {x.shape}")
    return x


def predict(m, X):
    return np.argmax(predict_proba(m, X), axis=-1)


def _check_labels(labels, n, n_classes):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
    if n and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes})")
    return labels.astype(np.int64)


def evaluate_error_rate(m, data, labels):
    X = as_matrix(data, "data")
    y = _check_labels(labels, X.shape[0], m.class_count)
    if X.shape[0] == 0:
        raise DataError("cannot score an empty dataset")
    return float(np.mean(predict(m, X) != y))


def dropout_mask(rng, shape, rate):
    """Inverted-dropout multiplier: 0 with probability ``rate``, else 1/(1-rate)."""
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def mean_cross_entropy(m, X, y):
    probs = predict_proba(m, X)
    return float(-np.mean(np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300))))


def _params_of(m):
    out = []
    for layer in m.layers:
        out += [layer.W, layer.b_h]
    return out + [m.classifier_W, m.classifier_b]


def _rebuild(m, arrays):
    layers = tuple(
        layer.with_arrays(arrays[2 * k], arrays[2 * k + 1], layer.b_x)
        for k, layer in enumerate(m.layers)
    )
    return StackedModel(layers, arrays[-2], arrays[-1])


def supervised_gradient(m, X, y, rng=None, rate=0.0):
    """Mean cross-entropy and its gradient, in the order of ``_params_of``.

    With ``rate > 0`` fresh inverted-dropout masks are drawn from ``rng``
    for the input of every layer and for the classifier input.
    """
    inputs, outputs, masks = [], [], []
    a = X
    for layer in m.layers:
        mask = dropout_mask(rng, a.shape, rate) if rate > 0 else None
        a_in = a if mask is None else a * mask
        masks.append(mask)
        inputs.append(a_in)
        a = encode(layer, a_in)
        outputs.append(a)
    top_mask = dropout_mask(rng, a.shape, rate) if rate > 0 else None
    top = a if top_mask is None else a * top_mask
    probs = softmax(top @ m.classifier_W.T + m.classifier_b)
    n = X.shape[0]
    rows = np.arange(n)
    loss = float(-np.mean(np.log(np.maximum(probs[rows, y], 1e-300))))

    delta = probs.copy()
    delta[rows, y] -= 1.0
    delta /= n
    grads = [None] * (2 * len(m.layers) + 2)
    grads[-2] = delta.T @ top
    grads[-1] = delta.sum(axis=0)
    d_out = delta @ m.classifier_W
    if top_mask is not None:
        d_out = d_out * top_mask
    for k in range(len(m.layers) - 1, -1, -1):
        h = outputs[k]
        dz = d_out * h * (1.0 - h)
        grads[2 * k] = dz.T @ inputs[k]
        grads[2 * k + 1] = dz.sum(axis=0)
        d_out = dz @ m.layers[k].W
        if masks[k] is not None:
            d_out = d_out * masks[k]
    return loss, grads


def finetune(m, data, labels, cfg, valid=None, n_classes=None):
    """Mini-batch backprop of softmax cross-entropy through the whole stack.

    A model without a classifier gets a zero-initialised one with
    ``n_classes`` (default: largest label + 1) outputs. ``valid`` is an
    optional ``(X, y)`` pair scored after every epoch.
    """
    X = as_matrix(data, "training data")
    if X.shape[0] == 0:
        raise DataError("training data is empty")
    if X.shape[1] != m.n_inputs:
        raise ShapeError(f"data has {X.shape[1]} columns, model expects {m.n_inputs}")
    if not m.has_classifier:
        lab = np.asarray(labels)
        m = m.with_classifier(int(n_classes if n_classes is not None else lab.max() + 1))
    y = _check_labels(labels, X.shape[0], m.class_count)
    if valid is not None:
        Xv = as_matrix(valid[0], "validation data")
        yv = _check_labels(valid[1], Xv.shape[0], m.class_count)

    rng = make_rng(cfg.seed)
    velocity = [np.zeros_like(a) for a in _params_of(m)]
    report = TrainReport(seed=cfg.seed)
    report.initial_objective = mean_cross_entropy(m, X, y)
    report.extra = {"train_error": [], "valid_error": []}
    n = X.shape[0]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            mu = momentum_at(epoch, cfg)
            order = rng.permutation(n) if cfg.shuffle else np.arange(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                _, grads = supervised_gradient(m, X[idx], y[idx], rng, cfg.dropout_rate)
                params = _params_of(m)
                new = []
                for i, (theta, g) in enumerate(zip(params, grads)):
                    velocity[i] = mu * velocity[i] - cfg.lr * g
                    new.append(theta + velocity[i])
                if not all(np.all(np.isfinite(a)) for a in new):
                    raise DivergenceError(
                        f"parameters became non-finite in fine-tuning epoch {epoch}", epoch=epoch
                    )
                m = _rebuild(m, new)
            loss = mean_cross_entropy(m, X, y)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite in fine-tuning epoch {epoch}", epoch=epoch)
            report.objectives.append(loss)
            report.seconds.append(time.perf_counter() - t0)
            report.extra["train_error"].append(float(np.mean(predict(m, X) != y)))
            if valid is not None:
                report.extra["valid_error"].append(float(np.mean(predict(m, Xv) != yv)))
    report.params = m
    return report
