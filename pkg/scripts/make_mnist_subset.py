"""Build the desk-scale MNIST subset (5000 train / 1000 test) as gzipped IDX.

Sources, in order of preference:

    --idx DIR   the original distribution files (train-images-idx3-ubyte[.gz],
                train-labels-idx1-ubyte[.gz], t10k-*); the first 5000 training
                and first 1000 test images are taken.
    --npm DIR   an unpacked copy of the ``mnist`` npm package (obtain it with
                ``npm pack mnist && tar xzf mnist-*.tgz``); its 10000 digits
                are stored as floats with three decimals, so pixels are
                recovered with rint(255 * v). A seeded permutation picks 5000
                train and 1000 disjoint test digits.
"""

import argparse
import glob
import gzip
import json
import os
import struct

import numpy as np

from ddae.data import IDX_IMAGES, IDX_LABELS, _read_idx


def _find(d, stem):
    hits = sorted(glob.glob(os.path.join(d, stem + "*")))
    if not hits:
        raise SystemExit(f"no file matching {stem}* in {d}")
    return hits[0]


def from_idx(d, n_train, n_test):
    tr_x = _read_idx(_find(d, "train-images"), IDX_IMAGES, 3)[:n_train]
    tr_y = _read_idx(_find(d, "train-labels"), IDX_LABELS, 1)[:n_train]
    te_x = _read_idx(_find(d, "t10k-images"), IDX_IMAGES, 3)[:n_test]
    te_y = _read_idx(_find(d, "t10k-labels"), IDX_LABELS, 1)[:n_test]
    return tr_x, tr_y, te_x, te_y


def from_npm(d, n_train, n_test, seed):
    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(d, "src", "digits", f"{digit}.json")) as fh:
            flat = np.asarray(json.load(fh)["data"], dtype=np.float64)
        imgs = flat.reshape(-1, 28, 28)
        images.append(np.rint(255.0 * imgs).clip(0, 255).astype(np.uint8))
        labels.append(np.full(imgs.shape[0], digit, dtype=np.uint8))
    X = np.concatenate(images)
    y = np.concatenate(labels)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(y))
    tr, te = perm[:n_train], perm[n_train : n_train + n_test]
    return X[tr], y[tr], X[te], y[te]


def _write(path, magic, arr):
    header = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape)
    # fixed mtime keeps the archives byte-reproducible
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(header + arr.astype(np.uint8).tobytes())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--idx")
    src.add_argument("--npm")
    ap.add_argument("--out", default="data/mnist-desk")
    ap.add_argument("--train", type=int, default=5000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    if a.idx:
        parts = from_idx(a.idx, a.train, a.test)
    else:
        parts = from_npm(a.npm, a.train, a.test, a.seed)
    os.makedirs(a.out, exist_ok=True)
    names = ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
             "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz")
    magics = (IDX_IMAGES, IDX_LABELS, IDX_IMAGES, IDX_LABELS)
    for name, magic, arr in zip(names, magics, parts):
        _write(os.path.join(a.out, name), magic, arr)
    print(f"wrote {len(parts[1])} train / {len(parts[3])} test digits to {a.out}")
    print("train class counts", np.bincount(parts[1], minlength=10).tolist())


if __name__ == "__main__":
    main()
