import numpy as np
import pytest
from scipy import ndimage

from cxranomaly.augment import ba_l_to_r, ba_r_to_l
from cxranomaly.errors import DegenerateMaskError
from cxranomaly.synthetic import BlobSpec, blob_mask


def _lung(center_col, half_width, seed, size=96, height=60.0, wobble=0.8):
    spec = BlobSpec(size * 0.45, center_col, half_width, height, wobble_px=wobble)
    return blob_mask((size, size), spec, np.random.default_rng(seed))


def _fill(mask, value):
    img = np.zeros(mask.shape, dtype=np.uint8)
    img[mask > 0] = value
    return img


def _medial_streak(mask, img, value, low_side):
    """Paint a 3 px streak on the medial (heart-facing) row ends."""
    out = img.copy()
    for r in range(mask.shape[0]):
        cols = np.nonzero(mask[r])[0]
        if len(cols) < 4:
            continue
        if low_side:
            out[r, cols[0] : cols[0] + 3] = value
        else:
            out[r, cols[-1] - 2 : cols[-1] + 1] = value
    return out


def test_constant_image_stays_constant():
    right = _lung(28, 12.0, 5)
    left = _lung(64, 16.0, 9)
    out = ba_r_to_l(_fill(right, 120), left, right)
    assert (out[left == 0] == 0).all()
    inside = out[left > 0]
    assert np.median(inside) == 120
    assert inside.max() <= 121
    interior = ndimage.binary_erosion(left > 0, iterations=3)
    vals = out[interior]
    assert (np.abs(vals.astype(int) - 120) <= 1).mean() >= 0.99


def test_mirror_symmetric_masks_give_exact_flip():
    right = _lung(28, 12.0, 5)
    left = np.ascontiguousarray(right[:, ::-1])
    rng = np.random.default_rng(0)
    img = _fill(right, 0)
    img[right > 0] = rng.integers(30, 220, size=int(right.sum()))
    out = ba_r_to_l(img, left, right)
    expected = np.ascontiguousarray(img[:, ::-1])
    diff = np.abs(out.astype(int) - expected.astype(int))[left > 0]
    assert diff.max() <= 1


def test_lesion_lands_at_mirrored_relative_position():
    right = _lung(28, 11.0, 5, wobble=0.0)
    left = _lung(64, 16.0, 9, wobble=0.0)
    img = _fill(right, 100)
    # bright dot at a known relative position inside the right lung
    rows = np.nonzero(right.any(axis=1))[0]
    target_row = rows[int(0.30 * (len(rows) - 1))]
    cols = np.nonzero(right[target_row])[0]
    target_col = cols[0] + int(0.40 * (len(cols) - 1))
    img[target_row - 1 : target_row + 2, target_col - 1 : target_col + 2] = 250

    out = ba_r_to_l(img, left, right)
    bright = np.argwhere(out >= 200)
    assert len(bright)
    centroid = bright.mean(axis=0)

    # expected: same relative row, flipped relative column
    lrows = np.nonzero(left.any(axis=1))[0]
    exp_row = lrows[0] + 0.30 * (len(lrows) - 1)
    lcols = np.nonzero(left[int(round(exp_row))])[0]
    exp_col = lcols[0] + (1.0 - 0.40) * (len(lcols) - 1)
    assert abs(centroid[0] - exp_row) <= 2.0
    assert abs(centroid[1] - exp_col) <= 2.0


def test_left_to_right_trims_the_medial_overhang():
    wide_left = _lung(64, 18.0, 3, wobble=0.0)
    narrow_right = _lung(28, 11.0, 4, wobble=0.0)
    img = _medial_streak(wide_left, _fill(wide_left, 100), 250, low_side=True)
    out = ba_l_to_r(img, narrow_right, wide_left)
    # the medial streak of the flipped-left rows must be cropped away
    # (cap rows where the intervals shorten may still stretch)
    assert (out > 200).sum() <= 0.02 * narrow_right.sum()
    assert (out[narrow_right == 0] == 0).all()


def test_left_to_right_stretches_when_shorter():
    narrow_left = _lung(64, 10.0, 3, wobble=0.0)
    wide_right = _lung(28, 17.0, 4, wobble=0.0)
    img = _medial_streak(narrow_left, _fill(narrow_left, 100), 250, low_side=True)
    out = ba_l_to_r(img, wide_right, narrow_left)
    # stretch branch keeps the streak
    assert (out > 200).sum() >= 0.02 * wide_right.sum()


def test_intensity_range_on_interior():
    right = _lung(28, 12.0, 5)
    left = _lung(64, 16.0, 9)
    rng = np.random.default_rng(1)
    img = _fill(right, 0)
    img[right > 0] = rng.integers(60, 180, size=int(right.sum()))
    out = ba_r_to_l(img, left, right)
    interior = ndimage.binary_erosion(left > 0, iterations=2)
    assert out[interior].min() >= 59
    assert out.max() <= 181


def test_round_trip_on_symmetric_masks():
    right = _lung(28, 12.0, 5)
    left = np.ascontiguousarray(right[:, ::-1])
    rng = np.random.default_rng(2)
    img = _fill(right, 0)
    img[right > 0] = rng.integers(40, 200, size=int(right.sum()))
    to_left = ba_r_to_l(img, left, right)
    back = ba_l_to_r(to_left, right, left)
    diff = np.abs(back.astype(int) - img.astype(int))[right > 0]
    assert (diff <= 2).mean() >= 0.95


def test_degenerate_mask_rejected():
    right = _lung(28, 12.0, 5)
    empty = np.zeros_like(right)
    with pytest.raises(DegenerateMaskError):
        ba_r_to_l(_fill(right, 100), empty, right)
