import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sarchange.errors import FormatError, ShapeError, TruncationError
from sarchange.raster import Raster, detect_format, load_raster, save_raster


def write_pgm(path, width, height, maxval, payload: bytes):
    path.write_bytes(f"P5\n{width} {height}\n{maxval}\n".encode() + payload)


def test_load_pgm8_scales_by_maxval(tmp_path):
    p = tmp_path / "a.pgm"
    write_pgm(p, 2, 2, 255, bytes([0, 255, 128, 64]))
    r = load_raster(p, "pgm8")
    assert (r.width, r.height, r.channels) == (2, 2, 1)
    np.testing.assert_allclose(
        r.band(0), [[0.0, 1.0], [128 / 255, 64 / 255]], rtol=0, atol=0
    )


def test_load_f32raw_identity(tmp_path):
    p = tmp_path / "b.f32"
    values = np.array([0.25, -1.5, 3.0], dtype="<f4")
    p.write_bytes(values.tobytes())
    (tmp_path / "b.f32.json").write_text(
        json.dumps({"width": 3, "height": 1, "channels": 1})
    )
    r = load_raster(p, "f32raw")
    np.testing.assert_array_equal(r.band(0), [[0.25, -1.5, 3.0]])


def test_pgm16_round_trip_within_quantisation_bound(tmp_path):
    rng = np.random.default_rng(7)
    original = Raster.from_array(rng.random((16, 16)))
    p = tmp_path / "c.pgm"
    save_raster(original, p, "pgm16")
    loaded = load_raster(p, "pgm16")
    assert np.abs(loaded.band(0) - original.band(0)).max() <= 1 / (2 * 65535)


def test_save_pgm8_constant_half_rounds_to_128(tmp_path):
    p = tmp_path / "d.pgm"
    save_raster(Raster.from_array(np.full((3, 4), 0.5)), p, "pgm8")
    payload = p.read_bytes().split(b"\n", 3)[3]
    assert payload == bytes([128] * 12)


def test_save_pgm8_binary_map(tmp_path):
    p = tmp_path / "e.pgm"
    save_raster(Raster.from_array(np.array([[0.0, 1.0]])), p, "pgm8")
    assert p.read_bytes().split(b"\n", 3)[3] == bytes([0, 255])


def test_pgm16_samples_are_big_endian(tmp_path):
    p = tmp_path / "f.pgm"
    save_raster(Raster.from_array(np.array([[1.0]])), p, "pgm16")
    assert p.read_bytes().split(b"\n", 3)[3] == b"\xff\xff"
    write_pgm(p, 1, 1, 65535, b"\x01\x00")  # 0x0100 = 256
    assert load_raster(p, "pgm16").band(0)[0, 0] == pytest.approx(256 / 65535)


@given(
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_f32raw_round_trip_is_identity(tmp_path_factory, h, w, c, seed):
    tmp = tmp_path_factory.mktemp("f32")
    rng = np.random.default_rng(seed)
    original = Raster((rng.standard_normal((h, w, c)) * 10).astype("<f4").astype(float))
    p = tmp / "x.f32"
    save_raster(original, p, "f32raw")
    np.testing.assert_array_equal(load_raster(p, "f32raw").data, original.data)


def test_malformed_header_raises_format_error(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(4))
    with pytest.raises(FormatError):
        load_raster(p, "pgm8")
    p.write_bytes(b"P5\n2 nonsense\n255\n")
    with pytest.raises(FormatError):
        load_raster(p, "pgm8")


def test_payload_size_mismatch_raises_truncation_error(tmp_path):
    p = tmp_path / "short.pgm"
    write_pgm(p, 4, 4, 255, bytes(15))
    with pytest.raises(TruncationError):
        load_raster(p, "pgm8")
    write_pgm(p, 4, 4, 255, bytes(17))
    with pytest.raises(TruncationError):
        load_raster(p, "pgm8")
    f = tmp_path / "short.f32"
    f.write_bytes(bytes(8))
    (tmp_path / "short.f32.json").write_text(
        json.dumps({"width": 3, "height": 1, "channels": 1})
    )
    with pytest.raises(TruncationError):
        load_raster(f, "f32raw")


def test_declared_format_must_match_depth(tmp_path):
    p = tmp_path / "deep.pgm"
    write_pgm(p, 1, 1, 65535, b"\x00\x01")
    with pytest.raises(FormatError):
        load_raster(p, "pgm8")
    write_pgm(p, 1, 1, 255, b"\x00")
    with pytest.raises(FormatError):
        load_raster(p, "pgm16")


def test_multichannel_pgm_save_rejected(tmp_path):
    r = Raster(np.zeros((2, 2, 3)))
    with pytest.raises(FormatError):
        save_raster(r, tmp_path / "rgb.pgm", "pgm8")


def test_non_finite_f32_rejected(tmp_path):
    p = tmp_path / "nan.f32"
    p.write_bytes(np.array([1.0, np.nan], dtype="<f4").tobytes())
    (tmp_path / "nan.f32.json").write_text(
        json.dumps({"width": 2, "height": 1, "channels": 1})
    )
    with pytest.raises(FormatError):
        load_raster(p, "f32raw")


def test_raster_rejects_non_finite_construction():
    with pytest.raises(FormatError):
        Raster.from_array(np.array([[np.inf]]))
    with pytest.raises(ShapeError):
        Raster(np.zeros((2, 2)))  # missing channel axis


def test_detect_format(tmp_path):
    p = tmp_path / "g.pgm"
    save_raster(Raster.from_array(np.array([[0.5]])), p, "pgm16")
    assert detect_format(p) == "pgm16"
    save_raster(Raster.from_array(np.array([[0.5]])), p, "pgm8")
    assert detect_format(p) == "pgm8"
    f = tmp_path / "g.f32"
    save_raster(Raster.from_array(np.array([[0.5]])), f, "f32raw")
    assert detect_format(f) == "f32raw"
