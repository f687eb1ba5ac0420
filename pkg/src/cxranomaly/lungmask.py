"""Lung-mask structure: left/right split, boundaries, geometric anchors.

Naming warning: ``right`` is the anatomical right lung, which appears on
the *image left* of a standard frontal chest radiograph. ``split_mask``
therefore assigns the component with the smaller mean column index to
``right``. Getting this backwards is a classic bug source; every
downstream side label ('l'/'r') follows this anatomical convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, SplitError
from .validation import as_mask

#: Minimum component area (in pixels) at 256x256; scaled by canvas area.
MIN_COMPONENT_AREA_256 = 64

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def min_component_area(shape: tuple[int, int]) -> int:
    h, w = shape
    return max(8, round(MIN_COMPONENT_AREA_256 * (h * w) / (256 * 256)))


@dataclass(frozen=True)
class LungPair:
    """Left and right lung masks split from one whole-lung mask."""

    left: np.ndarray
    right: np.ndarray

    def side(self, side: str) -> np.ndarray:
        if side not in ("l", "r"):
            raise ValueError(f"side must be 'l' or 'r', got {side!r}")
        return self.left if side == "l" else self.right


@dataclass(frozen=True)
class LungAnchors:
    """Lowest boundary point, apex (farthest boundary point), chord length."""

    lowest: tuple[int, int]
    apex: tuple[int, int]
    chord: float


def split_mask(mask: np.ndarray, min_area: int | None = None) -> LungPair:
    """Split a whole-lung mask into its two largest 8-connected components.

    Components smaller than ``min_area`` (default: 64 px at 256^2, scaled
    proportionally to canvas area) are treated as segmentation speckle and
    discarded. The component with the smaller mean column index becomes
    ``right``.
    """
    mask = as_mask(mask)
    if min_area is None:
        min_area = min_component_area(mask.shape)
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n < 2:
        raise SplitError(f"mask has {n} connected component(s), need at least 2")
    areas = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
    qualified = np.flatnonzero(areas >= min_area) + 1
    if len(qualified) < 2:
        raise SplitError(
            f"only {len(qualified)} component(s) of area >= {min_area}, need at least 2"
        )
    # Two largest; stable order so equal areas resolve to the lower label.
    order = np.argsort(-areas[qualified - 1], kind="stable")
    keep = qualified[order[:2]]
    masks = [(labels == lab).astype(np.uint8) for lab in keep]
    mean_cols = [np.argwhere(m)[:, 1].mean() for m in masks]
    right_idx = int(np.argmin(mean_cols))
    return LungPair(left=masks[1 - right_idx], right=masks[right_idx])


def boundary(mask: np.ndarray) -> np.ndarray:
    """Support pixels with a 4-neighbour outside the support (or off-image).

    Returns an (n, 2) array of (row, col) in row-major order.
    """
    mask = as_mask(mask)
    if not mask.any():
        raise EmptyMaskError("boundary of an empty mask")
    padded = np.pad(mask, 1)
    interior = (
        (padded[:-2, 1:-1] > 0)
        & (padded[2:, 1:-1] > 0)
        & (padded[1:-1, :-2] > 0)
        & (padded[1:-1, 2:] > 0)
    )
    return np.argwhere((mask > 0) & ~interior)


def anchors(mask: np.ndarray) -> LungAnchors:
    """Deterministic chord anchors of a mask.

    lowest: boundary point with the maximum row (tie: minimum column).
    apex:   boundary point farthest (Euclidean) from lowest
            (ties: minimum row, then minimum column).
    """
    pts = boundary(mask)
    low_i = np.lexsort((pts[:, 1], -pts[:, 0]))[0]
    lowest = (int(pts[low_i, 0]), int(pts[low_i, 1]))
    d2 = (pts[:, 0] - lowest[0]) ** 2 + (pts[:, 1] - lowest[1]) ** 2
    apex_i = np.lexsort((pts[:, 1], pts[:, 0], -d2))[0]
    apex = (int(pts[apex_i, 0]), int(pts[apex_i, 1]))
    return LungAnchors(lowest=lowest, apex=apex, chord=math.sqrt(float(d2[apex_i])))
