import numpy as np
import pytest

from nsverify.errors import FormatError
from nsverify.fields import STAGGERED, ScalarField, VectorField
from nsverify.grid import GridSpec
from nsverify.nsf1 import dump_bytes, load_bytes, read_field, write_field

from conftest import random_smooth_scalar, taylor_green


def test_scalar_roundtrip(torus64, tmp_path):
    s = random_smooth_scalar(torus64, 41)
    path = tmp_path / "s.nsf"
    write_field(path, s)
    back = read_field(path)
    assert back.grid == s.grid
    assert np.array_equal(back.values, s.values)


def test_vector_roundtrip(torus64):
    v = taylor_green(torus64)
    back = load_bytes(dump_bytes(v))
    assert back.layout == v.layout
    for a, b in zip(back.components, v.components):
        assert np.array_equal(a.values, b.values)


def test_staggered_roundtrip():
    g = GridSpec.box(16)
    v = VectorField.from_function(
        g, lambda x, y: (np.sin(np.pi * y) + 0.0 * x, 0.0 * (x + y)), layout=STAGGERED
    )
    back = load_bytes(dump_bytes(v))
    assert back.layout == STAGGERED
    for a, b in zip(back.components, v.components):
        assert a.location == b.location
        assert np.array_equal(a.values, b.values)


def test_cell_scalar_roundtrip():
    g = GridSpec.box(16)
    s = ScalarField.from_function(g, lambda x, y: x * y, location="cell")
    back = load_bytes(dump_bytes(s))
    assert back.location == "cell"
    assert np.array_equal(back.values, s.values)


def test_wrong_magic_rejected(torus64):
    buf = dump_bytes(ScalarField.zeros(torus64))
    with pytest.raises(FormatError, match="magic"):
        load_bytes(b"XXXX" + buf[4:])


def test_truncated_payload_rejected(torus64):
    buf = dump_bytes(ScalarField.zeros(torus64))
    with pytest.raises(FormatError, match="truncated"):
        load_bytes(buf[:-8])
    with pytest.raises(FormatError, match="truncated"):
        load_bytes(buf[:10])


def test_trailing_garbage_rejected(torus64):
    buf = dump_bytes(ScalarField.zeros(torus64))
    with pytest.raises(FormatError, match="trailing"):
        load_bytes(buf + b"\x00" * 8)


def test_bad_header_values_rejected(torus64):
    buf = bytearray(dump_bytes(ScalarField.zeros(torus64)))
    buf[4] = 7  # dims
    with pytest.raises(FormatError):
        load_bytes(bytes(buf))
