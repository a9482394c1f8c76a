import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_layer
from ddae.errors import FormatError
from ddae.modelfile import MAGIC, dumps, load_model, loads, save_model
from ddae.stacking import StackedModel


def model(rng, classifier=True, dec_act="sigmoid"):
    layers = (random_layer(rng, 6, 4, dec_act=dec_act), random_layer(rng, 4, 3))
    if not classifier:
        return StackedModel(layers)
    return StackedModel(layers, rng.standard_normal((2, 3)), rng.standard_normal(2))


@pytest.mark.parametrize("classifier", [True, False])
def test_save_load_save_is_byte_identical(tmp_path, rng, classifier):
    m = model(rng, classifier, dec_act="identity")
    raw = save_model(tmp_path / "m.ddae", m)
    back = load_model(tmp_path / "m.ddae")
    assert back.same_as(m)
    assert dumps(back) == raw
    assert back.layers[0].dec_act == "identity"


def test_header_layout(rng):
    raw = dumps(model(rng))
    assert raw[:4] == MAGIC
    version, count = struct.unpack("<HI", raw[4:10])
    assert (version, count) == (1, 2)
    dx, dh, enc, dec = struct.unpack("<IIBB", raw[10:20])
    assert (dx, dh, enc, dec) == (6, 4, 0, 0)
    assert struct.unpack("<I", raw[-4:])[0] == zlib.crc32(raw[:-4])


def test_weights_are_little_endian_row_major(rng):
    m = model(rng)
    raw = dumps(m)
    W = np.frombuffer(raw[20 : 20 + 8 * 24], dtype="<f8").reshape(4, 6)
    np.testing.assert_array_equal(W, m.layers[0].W)


def test_crc_mismatch(rng):
    raw = bytearray(dumps(model(rng)))
    raw[30] ^= 0xFF
    with pytest.raises(FormatError, match="checksum"):
        loads(bytes(raw))


def test_unknown_version(rng):
    raw = bytearray(dumps(model(rng)))
    raw[4:6] = struct.pack("<H", 9)
    payload = bytes(raw[:-4])
    with pytest.raises(FormatError, match="version"):
        loads(payload + struct.pack("<I", zlib.crc32(payload)))


def test_bad_magic():
    with pytest.raises(FormatError):
        loads(b"NOPE" + b"\x00" * 20)


def test_truncated(rng):
    raw = dumps(model(rng))
    payload = raw[:-40]
    with pytest.raises(FormatError):
        loads(payload + struct.pack("<I", zlib.crc32(payload)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_round_trip_property(seed, classifier):
    m = model(np.random.default_rng(seed), classifier)
    raw = dumps(m)
    assert dumps(loads(raw)) == raw
