import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bits_equal
from icfusion import blocks, io
from icfusion.config import build_config
from icfusion.tensor import seeded_uniform


def test_header_bytes():
    buf = io.encode_tensor(np.zeros((1, 2, 3, 4), np.float32))
    expected = (b"ICFT" + bytes([1, 0, 0, 0]) + bytes([4, 0, 0, 0])
                + b"".join(struct.pack("<Q", d) for d in (1, 2, 3, 4)) + bytes([1]))
    assert buf[:45] == expected
    assert len(buf) == 45 + 4 * 24


def test_payload_is_little_endian_f32():
    t = np.array([1.0, -2.5], np.float32).reshape(1, 2, 1, 1)
    assert io.encode_tensor(t)[45:] == struct.pack("<ff", 1.0, -2.5)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**63))
def test_roundtrip(n, c, h, w, seed):
    t = seeded_uniform((n, c, h, w), -100, 100, seed)
    assert bits_equal(io.decode_tensor(io.encode_tensor(t)), t)


def test_file_roundtrip(tmp_path):
    t = seeded_uniform((2, 3, 4, 5), -1, 1, 0)
    io.write_tensor(tmp_path / "t.icft", t)
    assert bits_equal(io.read_tensor(tmp_path / "t.icft"), t)


def test_special_values_roundtrip():
    t = np.array([0.0, -0.0, 1e-45, 3.4e38], np.float32).reshape(1, 4, 1, 1)
    assert bits_equal(io.decode_tensor(io.encode_tensor(t)), t)


@pytest.mark.parametrize("mutate, message", [
    (lambda b: b"XCFT" + b[4:], "bad magic"),
    (lambda b: b[:4] + struct.pack("<I", 2) + b[8:], "unsupported version"),
    (lambda b: b[:8] + struct.pack("<I", 3) + b[12:], "unsupported ndim"),
    (lambda b: b[:44] + bytes([2]) + b[45:], "unsupported dtype"),
    (lambda b: b[:20], "truncated header"),
    (lambda b: b[:-1], "payload length mismatch"),
    (lambda b: b + b"\0\0\0\0", "payload length mismatch"),
])
def test_malformed(mutate, message):
    good = io.encode_tensor(seeded_uniform((1, 2, 3, 4), -1, 1, 0))
    with pytest.raises(io.FormatError, match=message):
        io.decode_tensor(mutate(good))


def test_pgm(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
    assert io.read_image(path).tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_pgm_with_comment(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([51, 102]))
    assert io.read_image(path, pad=False).tolist() == [[0.2, 0.4]]


def test_ppm_red(tmp_path):
    path = tmp_path / "r.ppm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes([255, 0, 0]))
    assert io.read_image(path, pad=False).item() == pytest.approx(0.299, abs=1e-15)


def test_odd_image_is_padded(tmp_path):
    img = np.random.default_rng(0).random((3, 5))
    io.write_pgm(tmp_path / "o.pgm", img)
    assert io.read_image(tmp_path / "o.pgm").shape == (4, 6)


@pytest.mark.parametrize("data, message", [
    (b"P2\n2 2\n255\n0 1 1 0\n", "unsupported format"),
    (b"P5\n2 2\n65535\n" + bytes(8), "unsupported maxval"),
    (b"P5\n2 2\n255\n" + bytes(3), "truncated raster"),
    (b"P5\n2", "truncated image header"),
])
def test_image_errors(tmp_path, data, message):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(io.FormatError, match=message):
        io.read_image(path)


def test_ppm_write_read(tmp_path):
    rgb = np.random.default_rng(1).integers(0, 256, (4, 6, 3)) / 255.0
    io.write_ppm(tmp_path / "c.ppm", rgb)
    assert np.allclose(io.read_netpbm(tmp_path / "c.ppm"), rgb, atol=1e-15)


def test_params_roundtrip(tmp_path):
    cfg = build_config({"c_rgb": (4, 4, 8), "c_ir": (8, 8, 16)})
    params = blocks.init_params(cfg, 3)
    files = io.write_params(tmp_path, params)
    assert len(files) == 3 * 10 * 2
    loaded = io.read_params(tmp_path, cfg)
    for level in params:
        a, b = params[level].named_weights(), loaded[level].named_weights()
        for name in a:
            assert bits_equal(a[name].weight, b[name].weight)
            assert bits_equal(a[name].bias, b[name].bias)


def test_report_doc_is_stable():
    a = io.report_doc("x", {"b": 1, "a": 2}, {"z": [1.5, 2], "y": {"q": 0.1}})
    b = io.report_doc("x", {"a": 2, "b": 1}, {"y": {"q": 0.1}, "z": [1.5, 2]})
    assert a == b and a.endswith("\n")
    assert a.index('"config"') < a.index('"results"') < a.index('"schema"')
