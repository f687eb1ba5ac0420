"""Shared geometry kernel: chord frames, bilinear sampling, ray marching.

All coordinates are (row, col), row index increasing downward. A *chord
frame* is the rotated coordinate system used by both the registration
fast path and the relative-coordinate oracle: the frame is pivoted on a
mask's lowest boundary point and rotated so the chord from that point to
the apex (the farthest boundary point) becomes the vertical axis with the
apex pointing up (decreasing row).

Continuous mask membership is everywhere defined as "bilinear sample of
the {0, 1} raster >= 0.5", with zero padding outside the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MEMBERSHIP_THRESHOLD = 0.5


def bilinear(grid: np.ndarray, rows: np.ndarray, cols: np.ndarray, *, clamp: bool = False) -> np.ndarray:
    """Bilinear sample of ``grid`` at real coordinates.

    ``clamp=True`` clamps coordinates to the image bounds (image warping);
    ``clamp=False`` treats everything outside as 0 (mask membership).
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    if clamp:
        rows = np.clip(rows, 0.0, h - 1.0)
        cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    dr = rows - r0
    dc = cols - c0
    out = np.zeros(np.broadcast(rows, cols).shape, dtype=np.float64)
    for oi, wr in ((0, 1.0 - dr), (1, dr)):
        for oj, wc in ((0, 1.0 - dc), (1, dc)):
            ri = r0 + oi
            ci = c0 + oj
            inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
            weight = wr * wc
            vals = np.where(
                inside,
                grid[np.clip(ri, 0, h - 1).astype(np.intp), np.clip(ci, 0, w - 1).astype(np.intp)],
                0.0,
            )
            out += weight * vals
    return out


@dataclass(frozen=True)
class ChordFrame:
    """Rotation taking a mask's lowest-to-apex chord onto the vertical axis."""

    pivot: tuple[float, float]
    angle: float
    chord: float

    @classmethod
    def from_anchors(cls, lowest: tuple[int, int], apex: tuple[int, int], chord: float) -> "ChordFrame":
        dr = apex[0] - lowest[0]
        dc = apex[1] - lowest[1]
        angle = math.pi - math.atan2(dc, dr)
        return cls((float(lowest[0]), float(lowest[1])), angle, float(chord))

    def _rotate(self, rows, cols, angle):
        cos_a = math.cos(angle)
        sin_a = math.sin(angle)
        dr = np.asarray(rows, dtype=np.float64) - self.pivot[0]
        dc = np.asarray(cols, dtype=np.float64) - self.pivot[1]
        return (
            self.pivot[0] + cos_a * dr - sin_a * dc,
            self.pivot[1] + sin_a * dr + cos_a * dc,
        )

    def to_rotated(self, rows, cols):
        """Original-frame coordinates to chord-frame coordinates."""
        return self._rotate(rows, cols, self.angle)

    def to_original(self, rows, cols):
        """Chord-frame coordinates back to the original frame."""
        return self._rotate(rows, cols, -self.angle)

    def axis_direction(self, rotated_dir: tuple[float, float]) -> tuple[float, float]:
        """Original-frame unit vector for a chord-frame axis direction."""
        cos_a = math.cos(self.angle)
        sin_a = math.sin(self.angle)
        dr, dc = rotated_dir
        return (cos_a * dr + sin_a * dc, -sin_a * dr + cos_a * dc)


def ray_exit_distances(
    mask: np.ndarray,
    starts: np.ndarray,
    direction: tuple[float, float],
    step: float = 0.25,
) -> np.ndarray:
    """Distance from each start point to the mask boundary along a ray.

    Marches in fixed ``step`` increments, sampling membership bilinearly;
    the distance is the last step count still inside, so a ray whose first
    sample already left the support reports 0. Start points must be inside
    the support.
    """
    mask = np.asarray(mask, dtype=np.float64)
    h, w = mask.shape
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    n_steps = int(math.ceil(math.hypot(h, w) / step)) + 2
    ts = step * np.arange(1, n_steps + 1)
    rows = starts[:, 0:1] + ts[None, :] * direction[0]
    cols = starts[:, 1:2] + ts[None, :] * direction[1]
    inside = bilinear(mask, rows, cols) >= MEMBERSHIP_THRESHOLD
    first_out = np.argmax(~inside, axis=1)
    return first_out * step


def rotated_membership(
    mask: np.ndarray,
    frame: ChordFrame,
    rows: np.ndarray,
    cols: np.ndarray,
    row_map=None,
) -> np.ndarray:
    """Continuous membership values of ``mask`` sampled on a chord-frame grid.

    ``row_map``, when given, maps chord-frame row coordinates before the
    inverse rotation (used to sample a vertically rescaled mask).
    """
    rr, cc = np.meshgrid(np.asarray(rows, dtype=np.float64), np.asarray(cols, dtype=np.float64), indexing="ij")
    if row_map is not None:
        rr = row_map(rr)
    orows, ocols = frame.to_original(rr, cc)
    return bilinear(mask, orows, ocols)


def row_intervals(membership: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Per-row support interval [left, right] with sub-pixel endpoints.

    ``membership`` is a (rows, cols) grid of continuous membership values;
    the interval spans the outermost samples >= 0.5 in each row, with the
    endpoints refined to the 0.5 crossing by linear interpolation toward
    the first outside neighbour. Rows with no inside sample yield NaN.
    """
    inside = membership >= MEMBERSHIP_THRESHOLD
    n_rows, n_cols = inside.shape
    out = np.full((n_rows, 2), np.nan)
    any_inside = inside.any(axis=1)
    idx_left = np.argmax(inside, axis=1)
    idx_right = n_cols - 1 - np.argmax(inside[:, ::-1], axis=1)
    rows_idx = np.flatnonzero(any_inside)
    for i in rows_idx:
        li, ri = idx_left[i], idx_right[i]
        left = cols[li]
        if li > 0:
            v_in = membership[i, li]
            v_out = membership[i, li - 1]
            if v_in > v_out:
                left = cols[li] - (v_in - MEMBERSHIP_THRESHOLD) / (v_in - v_out) * (cols[li] - cols[li - 1])
        right = cols[ri]
        if ri < n_cols - 1:
            v_in = membership[i, ri]
            v_out = membership[i, ri + 1]
            if v_in > v_out:
                right = cols[ri] + (v_in - MEMBERSHIP_THRESHOLD) / (v_in - v_out) * (cols[ri + 1] - cols[ri])
        out[i] = (left, right)
    return out


def fill_missing_rows(table: np.ndarray) -> np.ndarray:
    """Replace NaN rows by the nearest populated row's values."""
    out = table.copy()
    missing = np.isnan(out[:, 0])
    if not missing.any():
        return out
    if missing.all():
        raise ValueError("no populated rows to borrow from")
    populated = np.flatnonzero(~missing)
    for i in np.flatnonzero(missing):
        nearest = populated[np.argmin(np.abs(populated - i))]
        out[i] = out[nearest]
    return out
