"""Binary PGM (P5, maxval 255) reader and writer.

The one image format of this package. The writer emits a canonical header
(``P5\\n<w> <h>\\n255\\n``) so write/read round-trips are bit-exact; the
reader accepts any whitespace-delimited P5 header with maxval 255 but
rejects comments, other magics, other depths, and trailing bytes.

Masks are stored as PGM with payload values {0, 255} (viewable in any
image tool) and mapped to {0, 1} arrays in memory.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import FormatError, UnsupportedDepthError
from .validation import as_gray_image, as_mask


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM file into a (h, w) uint8 array, bytes unchanged."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"not a binary PGM (magic {data[:2]!r}): {path}")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        if not token.isdigit():
            raise FormatError(f"non-numeric PGM header field {token!r}: {path}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedDepthError(f"maxval {maxval} unsupported (need 255): {path}")
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions {width}x{height}: {path}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"missing whitespace after PGM header: {path}")
    pos += 1
    payload = data[pos:]
    if len(payload) != width * height:
        raise FormatError(
            f"PGM payload is {len(payload)} bytes, expected {width * height}: {path}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write a (h, w) uint8 array as binary PGM. Bit-exact round-trip."""
    img = as_gray_image(img)
    height, width = img.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_mask(path: str | os.PathLike) -> np.ndarray:
    """Read a {0, 255}-valued PGM into a {0, 1} uint8 mask."""
    raw = read_pgm(path)
    bad = (raw != 0) & (raw != 255)
    if bad.any():
        value = int(raw[bad][0])
        raise FormatError(f"mask payload contains value {value} outside {{0, 255}}: {path}")
    return (raw == 255).astype(np.uint8)


def write_mask(mask: np.ndarray, path: str | os.PathLike) -> None:
    """Write a {0, 1} mask as a {0, 255}-valued PGM."""
    mask = as_mask(mask)
    write_pgm(mask * np.uint8(255), path)
