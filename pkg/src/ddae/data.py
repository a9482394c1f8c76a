"""Dataset containers, file readers and cross-validation folds.

Readers:
    IDX     big-endian MNIST layout (images 0x00000803, labels 0x00000801),
            optionally gzip-compressed.
    CSV     comma separated, optional header, one label column whose values
            are mapped to class indices in order of first appearance.
    genome  one A/C/G/T sequence per line.
"""

import csv
import gzip
import io
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConsistencyError, DataError, FormatError, ParameterError
from .numerics import make_rng

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801

GENOME_LEVELS = {"A": 0.0, "C": 1.0 / 3.0, "G": 2.0 / 3.0, "T": 1.0}
GENOME_ORDER = "ACGT"


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray = None
    class_count: int = 0
    # None, or a (mins, maxs) pair recorded by minmax_normalize
    normalization: tuple = None
    class_names: tuple = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        object.__setattr__(self, "features", X)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.shape != (X.shape[0],):
                raise ConsistencyError(f"{X.shape[0]} samples but {y.shape} labels")
            count = self.class_count or (int(y.max()) + 1 if y.size else 0)
            if y.size and (y.min() < 0 or y.max() >= count):
                raise DataError(f"labels must lie in [0, {count})")
            object.__setattr__(self, "labels", y)
            object.__setattr__(self, "class_count", count)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def has_labels(self):
        return self.labels is not None

    def subset(self, idx):
        idx = np.asarray(idx)
        return replace(
            self,
            features=self.features[idx],
            labels=None if self.labels is None else self.labels[idx],
        )


def _open_bytes(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _read_idx(path, magic, ndims):
    raw = _open_bytes(path)
    if len(raw) < 4:
        raise OSError(f"{path}: file truncated before the magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndims
    if len(raw) < header:
        raise OSError(f"{path}: file truncated inside the header")
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise OSError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(image_path, label_path=None):
    """Images scaled to [0, 1] by /255, one flattened image per row."""
    images = _read_idx(image_path, IDX_IMAGES, 3)
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = None
    if label_path is not None:
        y = _read_idx(label_path, IDX_LABELS, 1).astype(np.int64)
        if y.shape[0] != X.shape[0]:
            raise ConsistencyError(f"{X.shape[0]} images but {y.shape[0]} labels")
    count = int(y.max()) + 1 if y is not None and y.size else 0
    return Dataset(X, y, count)


def write_idx(image_path, images, label_path=None, labels=None):
    """Write uint8 images (N x rows x cols) and optional labels in IDX layout."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise DataError("images must be N x rows x cols")
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES, *images.shape))
        fh.write(images.astype(np.uint8).tobytes())
    if label_path is not None:
        labels = np.asarray(labels)
        with open(label_path, "wb") as fh:
            fh.write(struct.pack(">II", IDX_LABELS, labels.shape[0]))
            fh.write(labels.astype(np.uint8).tobytes())


def load_csv(path, label_column=-1, has_header=False):
    """Numeric CSV with one label column (index; negative counts from the end,
    ``None`` for unlabelled data)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    start = 1 if has_header else 0
    body = [(i + 1, r) for i, r in enumerate(rows) if i >= start and any(c.strip() for c in r)]
    if not body:
        raise FormatError(f"{path}: no data rows")
    width = len(body[0][1])
    feats, raw_labels = [], []
    lc = None
    if label_column is not None:
        lc = label_column % width
    for line, row in body:
        if len(row) != width:
            raise FormatError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        vals = []
        for j, cell in enumerate(row):
            if j == lc:
                raw_labels.append(cell.strip())
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise FormatError(f"{path}:{line}: non-numeric value {cell!r} in column {j}") from None
        feats.append(vals)
    X = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path}: features contain NaN or Inf")
    if lc is None:
        return Dataset(X)
    names = list(dict.fromkeys(raw_labels))
    index = {name: i for i, name in enumerate(names)}
    y = np.array([index[v] for v in raw_labels], dtype=np.int64)
    return Dataset(X, y, len(names), class_names=tuple(names))


def write_csv(path, d, header=True):
    """Features then a trailing label column (class names when known)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            cols = [f"f{j}" for j in range(d.dim)]
            w.writerow(cols + (["label"] if d.has_labels else []))
        for i in range(d.n):
            row = [repr(float(v)) for v in d.features[i]]
            if d.has_labels:
                lab = int(d.labels[i])
                row.append(d.class_names[lab] if d.class_names else str(lab))
            w.writerow(row)


def encode_genome(sequences, one_hot=False):
    """Map A, C, G, T to 0, 1/3, 2/3, 1 per position (or to 4-way one-hot)."""
    seqs = [s.strip().upper() for s in sequences]
    if not seqs:
        raise FormatError("no sequences given")
    length = len(seqs[0])
    for k, s in enumerate(seqs):
        if len(s) != length:
            raise ConsistencyError(f"sequence {k} has length {len(s)}, expected {length}")
        for pos, ch in enumerate(s):
            if ch not in GENOME_LEVELS:
                raise FormatError(f"sequence {k}: character {ch!r} at position {pos} is not A/C/G/T")
    if one_hot:
        X = np.zeros((len(seqs), 4 * length))
        for k, s in enumerate(seqs):
            for pos, ch in enumerate(s):
                X[k, 4 * pos + GENOME_ORDER.index(ch)] = 1.0
        return Dataset(X)
    X = np.array([[GENOME_LEVELS[ch] for ch in s] for s in seqs], dtype=np.float64)
    return Dataset(X.reshape(len(seqs), length))


def load_genome(path, one_hot=False):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    return encode_genome(lines, one_hot)


def load_label_lines(path):
    """One label per line, mapped to indices in order of first appearance."""
    with open(path, encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    names = list(dict.fromkeys(raw))
    index = {name: i for i, name in enumerate(names)}
    return np.array([index[v] for v in raw], dtype=np.int64), tuple(names)


def minmax_normalize(d):
    """Per-feature (x - min) / (max - min); constant features become 0."""
    X = d.features
    if X.shape[0] == 0:
        return d
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    Z = np.where(span > 0, (X - lo) / safe, 0.0)
    return replace(d, features=np.clip(Z, 0.0, 1.0), normalization=(lo, hi))


def apply_normalization(d, normalization):
    """Scale ``d`` with the min/max recorded on another dataset."""
    if normalization is None:
        return d
    lo, hi = normalization
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    Z = np.where(span > 0, (d.features - lo) / safe, 0.0)
    return replace(d, features=np.clip(Z, 0.0, 1.0), normalization=normalization)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def fold(self, i):
        """(train indices, test indices) for fold ``i``."""
        test = np.flatnonzero(self.assignments == i)
        train = np.flatnonzero(self.assignments != i)
        return train, test

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold(d, k, seed):
    n = d.n if isinstance(d, Dataset) else int(d)
    if not 2 <= k <= n:
        raise ParameterError(f"fold count must lie in [2, {n}], got {k}")
    perm = make_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)


def stratified_split(n, fraction, seed):
    """Seeded (train, held-out) index split with ``round(fraction * n)`` held out."""
    perm = make_rng(seed).permutation(n)
    cut = int(round(fraction * n))
    return np.sort(perm[cut:]), np.sort(perm[:cut])


def read_text_lines(raw):
    return io.StringIO(raw).read().splitlines()
