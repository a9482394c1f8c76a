"""Binary persistence for stacked models.

Layout (all integers and floats little-endian):

    "DDAE"                      4-byte magic
    version                     u16
    layer count                 u32
    per layer:
        D_x, D_h                u32, u32
        enc tag, dec tag        u8, u8   (0 sigmoid, 1 identity)
        W                       D_h * D_x f64, row-major
        b_h, b_x                D_h f64, D_x f64
    has classifier              u8
    if set:
        C                       u32
        weights, bias           C * D_top f64, C f64
    CRC-32 of everything above  u32
"""

import struct
import zlib

import numpy as np

from .autoencoder import IDENTITY, SIGMOID, LayerParams
from .errors import FormatError
from .stacking import StackedModel

MAGIC = b"DDAE"
VERSION = 1
_TAGS = {SIGMOID: 0, IDENTITY: 1}
_NAMES = {v: k for k, v in _TAGS.items()}


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(model):
    parts = [MAGIC, struct.pack("<HI", VERSION, len(model.layers))]
    for p in model.layers:
        parts.append(struct.pack("<IIBB", p.n_visible, p.n_hidden, _TAGS[p.enc_act], _TAGS[p.dec_act]))
        parts += [_f64(p.W), _f64(p.b_h), _f64(p.b_x)]
    if model.has_classifier:
        parts.append(struct.pack("<BI", 1, model.class_count))
        parts += [_f64(model.classifier_W), _f64(model.classifier_b)]
    else:
        parts.append(b"\x00")
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError("model file truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, *shape):
        n = int(np.prod(shape))
        return np.frombuffer(self.take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)


def loads(raw):
    if len(raw) < 10 or raw[:4] != MAGIC:
        raise FormatError("not a model file (bad magic)")
    payload, trailer = raw[:-4], raw[-4:]
    (crc,) = struct.unpack("<I", trailer)
    if zlib.crc32(payload) != crc:
        raise FormatError("model file checksum mismatch")
    r = _Reader(payload)
    r.take(4)
    version, n_layers = r.unpack("<HI")
    if version != VERSION:
        raise FormatError(f"unsupported model file version {version}")
    if n_layers < 1:
        raise FormatError("model file has no layers")
    layers = []
    for _ in range(n_layers):
        dx, dh, enc, dec = r.unpack("<IIBB")
        if enc not in _NAMES or dec not in _NAMES:
            raise FormatError(f"unknown activation tag ({enc}, {dec})")
        W = r.floats(dh, dx)
        b_h = r.floats(dh)
        b_x = r.floats(dx)
        layers.append(LayerParams(W, b_h, b_x, _NAMES[enc], _NAMES[dec]))
    (flag,) = r.unpack("<B")
    Wc = bc = None
    if flag == 1:
        (c,) = r.unpack("<I")
        Wc = r.floats(c, layers[-1].n_hidden)
        bc = r.floats(c)
    elif flag != 0:
        raise FormatError(f"bad classifier flag {flag}")
    if r.pos != len(payload):
        raise FormatError("trailing bytes after model payload")
    return StackedModel(tuple(layers), Wc, bc)


def save_model(path, model):
    raw = dumps(model)
    with open(path, "wb") as fh:
        fh.write(raw)
    return raw


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
