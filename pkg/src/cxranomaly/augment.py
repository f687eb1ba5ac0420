"""Bilaterally symmetrical augmentation: synthesize the opposite-side lung.

A registered right-lung image becomes a synthetic left-lung image (and
vice versa) by horizontally flipping the image, then registering the
flipped source mask onto the target-side fixed mask with the same
chord-frame machinery the registration module uses: vertical chord
matching followed by per-row interval mapping, evaluated in the target
side's own chord frame.

Left-to-right is special: the right lung is horizontally narrower (heart
region), so rows where the flipped-left interval is longer than the
right one are *translated* with the lateral ends aligned and the medial
overhang cropped, rather than squeezed. ``MEDIAL_IS_HIGH_COLUMN`` pins
the convention: in a standard frontal radiograph the right lung's
heart-facing side is its high-column end, so the crop removes the
high-column part of the flipped row.
"""

from __future__ import annotations

import numpy as np

from .registration import _dense_map, build_transform, warp
from .validation import as_gray_image, as_mask, check_same_shape

#: Medial (heart-facing) side of the synthesized right lung = high columns.
#: Flip this single constant if data with the opposite convention shows up.
MEDIAL_IS_HIGH_COLUMN = True


def _flip(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr[:, ::-1])


def _ba(
    x_src: np.ndarray,
    s_target: np.ndarray,
    s_source: np.ndarray,
    medial_trim: bool,
) -> np.ndarray:
    x_src = as_gray_image(x_src)
    s_target = as_mask(s_target)
    s_source = as_mask(s_source)
    check_same_shape(x_src, s_target, s_source)
    flipped_mask = _flip(s_source)
    flipped_img = _flip(x_src)
    transform = build_transform(flipped_mask, s_target, medial_trim=medial_trim)
    fwd = _dense_map(transform, "forward", s_target, flipped_mask.shape)
    return warp(flipped_img, fwd, fill=0)


def ba_r_to_l(x_rf: np.ndarray, s_lf: np.ndarray, s_rf: np.ndarray) -> np.ndarray:
    """Synthesize a fixed-frame left-lung image from a registered right one.

    The flipped right image is chord-matched and per-row stretched onto
    the fixed left mask (the left lung is wider, so rows stretch).
    Output support is contained in ``s_lf``; outside pixels are 0.
    """
    return _ba(x_rf, s_lf, s_rf, medial_trim=False)


def ba_l_to_r(x_lf: np.ndarray, s_rf: np.ndarray, s_lf: np.ndarray) -> np.ndarray:
    """Synthesize a fixed-frame right-lung image from a registered left one.

    Rows where the flipped-left interval is longer than the fixed-right
    interval keep their lateral part and lose the medial overhang (the
    virtual heart region); shorter rows are stretched.
    Output support is contained in ``s_rf``; outside pixels are 0.
    """
    if not MEDIAL_IS_HIGH_COLUMN:
        raise NotImplementedError("only the high-column medial convention is implemented")
    return _ba(x_lf, s_rf, s_lf, medial_trim=True)
