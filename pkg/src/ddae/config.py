"""Plain-text run configuration.

One ``key = value`` pair per line, ``#`` starts a comment. Every key is also
a command-line flag (``layers`` -> ``--layers``, ``ft_lr`` -> ``--ft-lr``),
and flags win over the file. Unknown keys are errors.

``data`` names a file (``.csv``, IDX images, ``.txt`` genome lines) or a
generated set such as ``synthetic:bars:200`` or ``synthetic:prototypes:200:16:3``.
"""

from dataclasses import dataclass, fields, replace

from .autoencoder import KINDS, NoiseSpec, ObjectiveSpec
from .errors import ConfigError, ParameterError
from .stacking import FineTuneConfig
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    # data
    data: str = ""
    labels: str = ""
    test_data: str = ""
    test_labels: str = ""
    data_format: str = "auto"
    label_column: int = -1
    has_header: bool = False
    one_hot: bool = False
    normalize: bool = False
    limit: int = 0
    test_limit: int = 0
    valid_fraction: float = 0.0
    data_seed: int = 0
    # architecture and objective
    layers: tuple = (100,)
    dec_act: str = "sigmoid"
    objective: str = "DAE"
    input_noise: str = "masking:25"
    hidden_noise: str = "masking:25"
    lam: float = 0.0
    alpha: float = 0.0
    recon_loss: str = "auto"
    # unsupervised training
    eta: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.1
    batch_size: int = 20
    epochs: int = 10
    momentum_start: float = 0.0
    momentum_end: float = 0.0
    patience: int = 0
    shuffle: bool = True
    # supervised fine-tuning
    ft_lr: float = 0.1
    ft_epochs: int = 20
    ft_batch_size: int = 20
    dropout: float = 0.0
    ft_momentum_start: float = 0.0
    ft_momentum_end: float = 0.0
    # run
    seed: int = 0
    out: str = "."
    jobs: int = 1
    record_time: bool = True

    def __post_init__(self):
        if self.objective not in KINDS:
            raise ConfigError(f"objective must be one of {KINDS}, got {self.objective!r}")
        if not self.layers or any(n < 1 for n in self.layers):
            raise ConfigError("layers must be a non-empty list of positive widths")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0.0 <= self.valid_fraction < 1.0:
            raise ConfigError("valid_fraction must lie in [0, 1)")
        try:
            self.objective_spec()
            self.train_config()
            self.finetune_config()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def objective_spec(self):
        return ObjectiveSpec(
            self.objective,
            NoiseSpec.parse(self.input_noise),
            NoiseSpec.parse(self.hidden_noise),
            lam=self.lam,
            alpha=self.alpha,
            recon_loss=self.recon_loss,
        )

    def train_config(self, seed=None):
        return TrainConfig(
            eta=self.eta,
            eta1=self.eta1,
            eta2=self.eta2,
            batch_size=self.batch_size,
            epochs=self.epochs,
            momentum_start=self.momentum_start,
            momentum_end=self.momentum_end,
            seed=self.seed if seed is None else seed,
            shuffle=self.shuffle,
            patience=self.patience or None,
        )

    def finetune_config(self, seed=None):
        return FineTuneConfig(
            lr=self.ft_lr,
            epochs=self.ft_epochs,
            batch_size=self.ft_batch_size,
            dropout_rate=self.dropout,
            momentum_start=self.ft_momentum_start,
            momentum_end=self.ft_momentum_end,
            seed=self.seed if seed is None else seed,
            shuffle=self.shuffle,
        )


FIELDS = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_value(key, text):
    """Convert ``text`` to the type of ``key``'s default."""
    if key not in FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    default = getattr(_DEFAULTS, key)
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}") from None
    return text


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_text(text, source="<config>"):
    """``key=value`` lines to a dict of typed values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key = key.strip()
        if key not in FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key {key!r}")
        out[key] = parse_value(key, value)
    return out


def load_config(path=None, overrides=None):
    values = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_text(fh.read(), path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if key not in FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = value
    return RunConfig(**values)


def dump_config(cfg):
    return "".join(f"{f} = {format_value(getattr(cfg, f))}\n" for f in FIELDS)


def with_value(cfg, key, value):
    """Copy of ``cfg`` with one key replaced (``value`` may be text)."""
    if key not in FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if isinstance(value, str):
        value = parse_value(key, value)
    return replace(cfg, **{key: value})
