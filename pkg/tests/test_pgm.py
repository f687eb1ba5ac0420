import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxranomaly.errors import FormatError, UnsupportedDepthError
from cxranomaly.pgm import read_mask, read_pgm, write_mask, write_pgm


def test_read_exact_bytes(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7]))
    img = read_pgm(path)
    assert img.shape == (2, 2)
    assert img.tolist() == [[0, 128], [255, 7]]


def test_ascii_magic_rejected(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 1 2 3")
    with pytest.raises(FormatError):
        read_pgm(path)


def test_high_depth_rejected(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(UnsupportedDepthError):
        read_pgm(path)


def test_single_pixel_payload(tmp_path):
    path = tmp_path / "one.pgm"
    write_pgm(np.array([[42]], dtype=np.uint8), path)
    data = path.read_bytes()
    assert data == b"P5\n1 1\n255\n\x2a"
    assert read_pgm(path).tolist() == [[42]]


def test_missing_directory_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        write_pgm(np.zeros((2, 2), dtype=np.uint8), tmp_path / "nodir" / "a.pgm")


@pytest.mark.parametrize(
    "payload",
    [b"P5\n2 2\n255\n" + b"\x00" * 3, b"P5\n2 2\n255\n" + b"\x00" * 5, b"P5\n2 2\n255"],
)
def test_malformed_payload_rejected(tmp_path, payload):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(FormatError):
        read_pgm(path)


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(1, 16),
    w=st.integers(1, 16),
    data=st.data(),
)
def test_roundtrip_bit_exact(h, w, data):
    import tempfile
    from pathlib import Path

    values = data.draw(st.lists(st.integers(0, 255), min_size=h * w, max_size=h * w))
    img = np.array(values, dtype=np.uint8).reshape(h, w)
    with tempfile.TemporaryDirectory() as tmp:
        first = Path(tmp) / "rt.pgm"
        second = Path(tmp) / "rt2.pgm"
        write_pgm(img, first)
        again = read_pgm(first)
        assert np.array_equal(img, again)
        write_pgm(again, second)
        assert first.read_bytes() == second.read_bytes()


def test_mask_roundtrip(tmp_path):
    mask = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    path = tmp_path / "m.pgm"
    write_mask(mask, path)
    raw = read_pgm(path)
    assert set(np.unique(raw)) <= {0, 255}
    assert np.array_equal(read_mask(path), mask)


def test_mask_intermediate_value_rejected(tmp_path):
    path = tmp_path / "m.pgm"
    path.write_bytes(b"P5\n2 1\n255\n" + bytes([0, 200]))
    with pytest.raises(FormatError):
        read_mask(path)
