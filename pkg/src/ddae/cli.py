"""Command-line entry point (``ddae``).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 divergence.
"""

import argparse
import csv
import logging
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import data as dmod
from .autoencoder import NoiseSpec, encode
from .config import FIELDS, dump_config, format_value, load_config, parse_value
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    DomainError,
    ParameterError,
    ShapeError,
    UnsupportedConfigError,
)
from .modelfile import VERSION, dumps, load_model, save_model
from .numerics import make_rng
from .stacking import derive_seed, evaluate_error_rate, finetune, greedy_pretrain
from .synthetic import bars, blobs, prototypes, rank2_sigmoid
from .theory import SURFACES, audit_theorem1, audit_theorem2, penalty_descent_demo, rehr_descent_demo

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 0, 2, 3, 4

log = logging.getLogger("ddae")


# ---------------------------------------------------------------- data


def _synthetic(spec, seed):
    parts = spec.split(":")[1:]
    if not parts:
        raise ConfigError(f"bad synthetic data spec {spec!r}")
    name, args = parts[0], parts[1:]
    try:
        nums = [int(a) for a in args]
    except ValueError:
        raise ConfigError(f"bad synthetic data spec {spec!r}") from None
    rng = make_rng(seed)
    if name == "bars":
        n, size = (nums + [200, 8][len(nums):])[:2]
        return dmod.Dataset(bars(rng, n, size))
    if name == "prototypes":
        n, dim, k = (nums + [200, 16, 3][len(nums):])[:3]
        X, y = prototypes(rng, n, dim, k)
        return dmod.Dataset(X, y, k)
    if name == "blobs":
        n = nums[0] if nums else 200
        X, y = blobs(rng, n)
        return dmod.Dataset(X, y, 2)
    if name == "rank2":
        n, dim = (nums + [64, 8][len(nums):])[:2]
        return dmod.Dataset(rank2_sigmoid(rng, n, dim))
    raise ConfigError(f"unknown synthetic dataset {name!r}")


def _format_of(cfg, path):
    if cfg.data_format != "auto":
        return cfg.data_format
    low = path.lower().removesuffix(".gz")
    if low.endswith(".csv"):
        return "csv"
    if low.endswith((".txt", ".seq", ".genome")):
        return "genome"
    return "idx"


def load_dataset(cfg, path, labels_path="", seed_key=0, limit=0):
    if not path:
        raise ConfigError("no dataset given (set data = ...)")
    if path.startswith("synthetic:"):
        d = _synthetic(path, derive_seed(cfg.data_seed, seed_key))
    else:
        fmt = _format_of(cfg, path)
        if fmt == "csv":
            d = dmod.load_csv(path, cfg.label_column, cfg.has_header)
        elif fmt == "csv_unlabeled":
            d = dmod.load_csv(path, None, cfg.has_header)
        elif fmt == "genome":
            d = dmod.load_genome(path, cfg.one_hot)
            if labels_path:
                y, names = dmod.load_label_lines(labels_path)
                d = dmod.Dataset(d.features, y, len(names), class_names=names)
        elif fmt == "idx":
            d = dmod.load_idx(path, labels_path or None)
        else:
            raise ConfigError(f"unknown data_format {fmt!r}")
    if limit:
        d = d.subset(np.arange(min(limit, d.n)))
    return d


def load_splits(cfg, need_labels=False):
    """(train, valid or None, test or None) as configured."""
    train = load_dataset(cfg, cfg.data, cfg.labels, 0, cfg.limit)
    test = None
    if cfg.test_data:
        test = load_dataset(cfg, cfg.test_data, cfg.test_labels, 1, cfg.test_limit)
        if test.dim != train.dim:
            raise dmod.ConsistencyError(f"test data has {test.dim} columns, training data {train.dim}")
    if cfg.normalize:
        train = dmod.minmax_normalize(train)
        if test is not None:
            test = dmod.apply_normalization(test, train.normalization)
    valid = None
    if cfg.valid_fraction > 0:
        tr, va = dmod.stratified_split(train.n, cfg.valid_fraction, cfg.data_seed)
        train, valid = train.subset(tr), train.subset(va)
    if need_labels:
        for d, what in ((train, "training"), (valid, "validation"), (test, "test")):
            if d is not None and not d.has_labels:
                raise DataError(f"{what} data has no labels")
    return train, valid, test


# ------------------------------------------------------------ pipeline


def pretrain_stack(cfg, X, seed=None):
    """Greedy pretraining; returns (model, metrics rows)."""
    rows = []

    def record(k, report, _inputs):
        for e, (obj, sec) in enumerate(zip(report.objectives, report.seconds), 1):
            rows.append((e, k, obj, sec if cfg.record_time else 0.0))
        log.info("layer %d: %d epochs, final objective %s", k, report.epochs_run,
                 report.objectives[-1] if report.objectives else report.initial_objective)

    model = greedy_pretrain(
        X, cfg.layers, cfg.objective_spec(), cfg.train_config(seed), cfg.dec_act, on_layer=record
    )
    return model, rows


def finetune_stack(cfg, model, train, valid=None, seed=None, n_classes=None):
    vpair = None if valid is None else (valid.features, valid.labels)
    k = n_classes or train.class_count
    if valid is not None:
        k = max(k, valid.class_count)
    return finetune(model, train.features, train.labels, cfg.finetune_config(seed), vpair, k)


def run_pipeline(cfg, train, valid, seed=None):
    """Pretrain then fine-tune; returns (model, pretrain rows, fine-tune report)."""
    model, rows = pretrain_stack(cfg, train.features, seed)
    report = finetune_stack(cfg, model, train, valid, seed)
    return report.params, rows, report


def _fold_job(args):
    cfg, train, test, fold = args
    seed = derive_seed(cfg.seed, fold)
    model, _, _ = run_pipeline(cfg, train, None, seed)
    return evaluate_error_rate(model, test.features, test.labels)


def _sweep_job(args):
    cfg, train, valid = args
    model, _, _ = run_pipeline(cfg, train, valid)
    return evaluate_error_rate(model, valid.features, valid.labels)


def _map(fn, jobs, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------- outputs


def _num(v):
    return repr(float(v))


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _out_path(cfg, given, default):
    path = given or os.path.join(cfg.out, default)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def format_mean_std(values):
    """Percent error as ``mean±std`` with two decimals (sample std)."""
    v = 100.0 * np.asarray(values, dtype=np.float64)
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return f"{float(np.mean(v)):.2f}±{std:.2f}"


def filter_image(row, rows, cols):
    """Min-max scale one filter to 0..255; a constant filter maps to 0."""
    w = np.asarray(row, dtype=np.float64)
    lo, hi = float(w.min()), float(w.max())
    if hi > lo:
        pix = np.rint(255.0 * (w - lo) / (hi - lo))
    else:
        pix = np.zeros_like(w)
    return pix.astype(np.uint8).reshape(rows, cols)


def write_pgm(path, img):
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


# ------------------------------------------------------------ commands


def cmd_pretrain(cfg, args):
    train, _, _ = load_splits(cfg)
    model, rows = pretrain_stack(cfg, train.features)
    model_path = _out_path(cfg, args.model_out, "pretrained.ddae")
    metrics = _out_path(cfg, args.metrics, "pretrain_metrics.csv")
    save_model(model_path, model)
    write_rows(metrics, ["epoch", "layer", "objective", "seconds"],
               [(e, k, _num(o), f"{s:.6f}") for e, k, o, s in rows])
    print(f"model {model_path}")
    print(f"metrics {metrics}")
    return EXIT_OK


def cmd_finetune(cfg, args):
    train, valid, test = load_splits(cfg, need_labels=True)
    model = load_model(args.model)
    # valid_error tracks the held-out split, or the test data when there is none
    report = finetune_stack(cfg, model, train, valid if valid is not None else test)
    model_path = _out_path(cfg, args.model_out, "finetuned.ddae")
    metrics = _out_path(cfg, args.metrics, "finetune_metrics.csv")
    save_model(model_path, report.params)
    tr = report.extra["train_error"]
    va = report.extra["valid_error"]
    write_rows(metrics, ["epoch", "train_error", "valid_error"],
               [(e + 1, _num(tr[e]), _num(va[e]) if va else "") for e in range(len(tr))])
    print(f"model {model_path}")
    print(f"metrics {metrics}")
    if tr:
        print(f"train_error {tr[-1]:.4f}")
    if test is not None:
        print(f"test_error {evaluate_error_rate(report.params, test.features, test.labels):.4f}")
    return EXIT_OK


def cmd_eval(cfg, args):
    if args.kfold:
        train, _, _ = load_splits(replace(cfg, valid_fraction=0.0), need_labels=True)
        plan = dmod.kfold(train, args.kfold, cfg.seed)
        jobs = []
        for i in range(plan.k):
            tr, te = plan.fold(i)
            jobs.append((cfg, train.subset(tr), train.subset(te), i))
        errors = _map(_fold_job, cfg.jobs, jobs)
        rows = []
        for i, err in enumerate(errors):
            tr, te = plan.fold(i)
            log.info("fold %d: train %d test %d error %.6f", i, len(tr), len(te), err)
            rows.append((i, len(tr), len(te), _num(err)))
        write_rows(_out_path(cfg, args.folds_csv, "kfold.csv"), ["fold", "n_train", "n_test", "error"], rows)
        print(format_mean_std(errors))
        return EXIT_OK
    if not args.model:
        raise ConfigError("eval needs --model (or --kfold k)")
    model = load_model(args.model)
    # scores the test set when one is configured, else the training data
    train, _, test = load_splits(replace(cfg, valid_fraction=0.0))
    d = test if test is not None else train
    if not d.has_labels:
        raise DataError("evaluation data has no labels")
    print(f"{evaluate_error_rate(model, d.features, d.labels):.4f}")
    return EXIT_OK


def _layer_inputs(model, X, layer):
    if not 0 <= layer < len(model.layers):
        raise ConfigError(f"layer index {layer} out of range for {len(model.layers)} layers")
    for p in model.layers[:layer]:
        X = encode(p, X)
    return model.layers[layer], X


AUDIT_HEADER = ["sample", "left", "right", "holds", "gate"]


def audit_rows(audit):
    """Per-sample rows plus a summary row of the two fractions and counts."""
    rows = [
        (i, _num(audit.left[i]), _num(audit.right[i]), int(audit.holds[i]), int(audit.in_gate[i]))
        for i in range(audit.n)
    ]
    rows.append(("summary", _num(audit.fraction_holding), _num(audit.fraction_holding_gated),
                 audit.n - audit.n_excluded, audit.n_gated))
    return rows


def cmd_verify(cfg, args):
    model = load_model(args.model)
    d = load_dataset(cfg, cfg.data, cfg.labels, 0, cfg.limit)
    if cfg.normalize:
        d = dmod.minmax_normalize(d)
    p, X = _layer_inputs(model, d.features, args.layer)
    if args.theorem == 1:
        audit = audit_theorem1(p, X, eps=args.eps, gate=args.gate)
    else:
        noise = NoiseSpec.parse(args.noise)
        hidden = NoiseSpec.parse(args.audit_hidden_noise) if args.audit_hidden_noise else None
        audit = audit_theorem2(make_rng(cfg.seed), p, X, noise, args.draws, eps=args.eps,
                               gate=args.gate, se_slack=args.se_slack, hidden_noise=hidden)
    path = _out_path(cfg, args.csv, "audit.csv")
    write_rows(path, AUDIT_HEADER, audit_rows(audit))
    print(f"fraction_holding {audit.fraction_holding:.6f}")
    print(f"fraction_holding_gated {audit.fraction_holding_gated:.6f}")
    print(f"n_gated {audit.n_gated} n_excluded {audit.n_excluded}")
    print(f"audit {path}")
    return EXIT_OK


def _point(text, what):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad {what} {text!r}") from None
    if len(vals) != 2:
        raise ConfigError(f"{what} must have two coordinates")
    return vals


def cmd_demo_surfaces(cfg, args):
    if args.surface not in SURFACES:
        raise ConfigError(f"unknown surface {args.surface!r}; choose from {SURFACES}")
    x0 = _point(args.x0, "x0")
    target = _point(args.target, "target")
    if args.optimizer == "penalty":
        traj = penalty_descent_demo(args.surface, x0, args.step_size, args.steps, target)
    else:
        traj = rehr_descent_demo(args.surface, target, x0, args.step_size, args.steps)
    path = _out_path(cfg, args.csv, f"trajectory_{args.surface}_{args.optimizer}.csv")
    write_rows(path, ["step", "x1", "x2", "h", "penalty", "loss", "distance"],
               [(t.step, _num(t.x1), _num(t.x2), _num(t.h), _num(t.penalty), _num(t.loss),
                 _num(t.distance)) for t in traj])
    last = traj[-1]
    print(f"final x ({last.x1:.6g}, {last.x2:.6g}) h {last.h:.6g}")
    print(f"trajectory {path}")
    return EXIT_OK


def cmd_export_filters(cfg, args):
    model = load_model(args.model)
    if not 0 <= args.layer < len(model.layers):
        raise ConfigError(f"layer index {args.layer} out of range")
    try:
        rows, cols = (int(v) for v in args.geometry.lower().split("x"))
    except ValueError:
        raise ConfigError(f"geometry must look like 28x28, got {args.geometry!r}") from None
    W = model.layers[args.layer].W
    if rows * cols != W.shape[1]:
        raise ConfigError(f"geometry {rows}x{cols} does not match {W.shape[1]} inputs")
    out_dir = args.out_dir or os.path.join(cfg.out, "filters")
    os.makedirs(out_dir, exist_ok=True)
    width = max(4, len(str(W.shape[0] - 1)))
    for j in range(W.shape[0]):
        write_pgm(os.path.join(out_dir, f"filter_{j:0{width}d}.pgm"), filter_image(W[j], rows, cols))
    print(f"{W.shape[0]} filters written to {out_dir}")
    return EXIT_OK


def cmd_sweep(cfg, args):
    key = args.key
    if key not in FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    values = [v for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values given")
    train, valid, test = load_splits(cfg, need_labels=True)
    if valid is None:
        valid = test
    if valid is None:
        raise ConfigError("sweep needs held-out data (valid_fraction or test_data)")
    jobs = [(replace(cfg, **{key: parse_value(key, v)}), train, valid) for v in values]
    errors = _map(_sweep_job, cfg.jobs, jobs)
    rows = [(format_value(getattr(c, key)), _num(e)) for (c, _, _), e in zip(jobs, errors)]
    path = _out_path(cfg, args.csv, f"sweep_{key}.csv")
    write_rows(path, ["value", "valid_error"], rows)
    for v, e in rows:
        print(f"{key}={v} valid_error={float(e):.4f}")
    print(f"sweep {path}")
    return EXIT_OK


def cmd_info(cfg, args):
    if not args.model:
        print(f"model file format version {VERSION}")
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    model = load_model(args.model)
    raw = dumps(model)
    print(f"format version {VERSION}")
    for k, p in enumerate(model.layers):
        print(f"layer {k}: {p.n_visible} -> {p.n_hidden} enc={p.enc_act} dec={p.dec_act}")
    if model.has_classifier:
        print(f"classifier: {model.n_top} -> {model.class_count}")
    else:
        print("classifier: none")
    print(f"bytes {len(raw)} crc32 {zlib.crc32(raw[:-4]):08x}")
    return EXIT_OK


# -------------------------------------------------------------- parser


def _flag(key):
    return "--" + key.replace("_", "-")


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
    p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    for key in FIELDS:
        p.add_argument(_flag(key), dest=f"cfg_{key}", default=argparse.SUPPRESS, metavar="V",
                       help=f"override config key {key}")
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="ddae", parents=[common],
                                     description="Double denoising auto-encoder toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", parents=[common], help="greedy layer-wise pretraining")
    p.add_argument("--model-out", default="")
    p.add_argument("--metrics", default="")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", parents=[common], help="supervised fine-tuning")
    p.add_argument("--model", required=True)
    p.add_argument("--model-out", default="")
    p.add_argument("--metrics", default="")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", parents=[common], help="error rate, or k-fold cross-validation")
    p.add_argument("--model", default="")
    p.add_argument("--kfold", type=int, default=0)
    p.add_argument("--folds-csv", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="reconstruction-bound audits")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--theorem", type=int, choices=(1, 2), default=1)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--gate", type=float, default=1e-2)
    p.add_argument("--draws", type=int, default=256)
    p.add_argument("--noise", default="masking:25")
    p.add_argument("--audit-hidden-noise", default="", help="defaults to --noise")
    p.add_argument("--se-slack", type=float, default=3.0)
    p.add_argument("--csv", default="")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo-surfaces", parents=[common], help="penalty and hidden-reconstruction descent demos")
    p.add_argument("--surface", default="cone")
    p.add_argument("--optimizer", choices=("penalty", "rehr"), default="penalty")
    p.add_argument("--x0", default="3,4")
    p.add_argument("--target", default="0,0")
    p.add_argument("--step-size", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--csv", default="")
    p.set_defaults(func=cmd_demo_surfaces)

    p = sub.add_parser("export-filters", parents=[common], help="write filters as PGM images")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--geometry", required=True, help="ROWSxCOLS, e.g. 28x28")
    p.add_argument("--out-dir", default="")
    p.set_defaults(func=cmd_export_filters)

    p = sub.add_parser("sweep", parents=[common], help="grid search over one config key")
    p.add_argument("--key", required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--csv", default="")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("info", parents=[common], help="describe a model file or the resolved config")
    p.add_argument("--model", default="")
    p.set_defaults(func=cmd_info)
    return parser


def resolve_config(args):
    overrides = {}
    for key in FIELDS:
        if hasattr(args, f"cfg_{key}"):
            overrides[key] = parse_value(key, getattr(args, f"cfg_{key}"))
    return load_config(getattr(args, "config", None), overrides)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except (ConfigError, ParameterError, UnsupportedConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
