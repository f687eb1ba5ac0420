"""Input validation helpers.

Images, masks, and signed maps are plain numpy arrays throughout the
package; these helpers normalise user input to the canonical dtypes and
fail loudly on contract violations:

* gray image   -- ``uint8`` array of shape ``(h, w)``, values 0..255
* binary mask  -- ``uint8`` array of shape ``(h, w)``, values exactly {0, 1}
* signed map   -- ``int16`` array of shape ``(h, w)``, values -255..255
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, ShapeError


def as_gray_image(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ShapeError(f"gray image must be 2-D, got shape {a.shape}")
    if a.dtype != np.uint8:
        if not np.issubdtype(a.dtype, np.integer):
            raise InputError(f"gray image must be integer-valued, got {a.dtype}")
        if a.size and (a.min() < 0 or a.max() > 255):
            raise InputError("gray image values must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def as_mask(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {a.shape}")
    if a.size and not np.isin(a, (0, 1)).all():
        raise InputError("mask values must be exactly 0 or 1")
    return a.astype(np.uint8, copy=False)


def as_signed_map(arr) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ShapeError(f"signed map must be 2-D, got shape {a.shape}")
    if a.size and (a.min() < -255 or a.max() > 255):
        raise InputError("signed map values must lie in [-255, 255]")
    return a.astype(np.int16, copy=False)


def check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise ShapeError(f"arrays must share one shape, got {sorted(shapes)}")


def support(mask: np.ndarray) -> np.ndarray:
    """Coordinates of nonzero pixels as an (n, 2) int array.

    Row-major (lexicographic) order; every operation that enumerates a
    support set relies on this ordering for deterministic tie-breaks.
    """
    return np.argwhere(mask != 0)
