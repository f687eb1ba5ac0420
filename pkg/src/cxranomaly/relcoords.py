"""Relative lung coordinates and the brute-force registration oracle.

A pixel's relative coordinates inside a mask are the four boundary-ray
ratios measured in the mask's chord frame: cast rays from the pixel along
the rotated vertical and horizontal axes until they leave the support,
then normalise the opposing distances to sum to 1. The oracle registers
two masks by exhaustively matching these 4-vectors, which is the ground
truth the fast registration path is verified against. Cost is
O(|supp(moving)| * |supp(fixed)|), so keep oracle masks small.

The ray directions are fixed by the frame: 'down' points away from the
apex (increasing chord-frame row), 'right' toward increasing chord-frame
column.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateMaskError, OutOfSupportError
from .geometry import ChordFrame, ray_exit_distances
from .lungmask import LungAnchors, anchors
from .validation import as_mask, support

RAY_STEP = 0.25


class RelCoord(NamedTuple):
    pv1: float  # down-share of the vertical chord through the pixel
    pv2: float  # up-share
    qh1: float  # left-share of the horizontal chord
    qh2: float  # right-share


def _frame(a: LungAnchors) -> ChordFrame:
    if a.chord <= 0:
        raise DegenerateMaskError("zero chord length")
    return ChordFrame.from_anchors(a.lowest, a.apex, a.chord)


def _ray_ratios(mask: np.ndarray, frame: ChordFrame, points: np.ndarray) -> np.ndarray:
    """(n, 4) relative coordinates for real-valued in-support points."""
    down = frame.axis_direction((1.0, 0.0))
    right = frame.axis_direction((0.0, 1.0))
    p1 = ray_exit_distances(mask, points, down, RAY_STEP)
    p2 = ray_exit_distances(mask, points, (-down[0], -down[1]), RAY_STEP)
    q1 = ray_exit_distances(mask, points, (-right[0], -right[1]), RAY_STEP)
    q2 = ray_exit_distances(mask, points, right, RAY_STEP)

    def ratio(a, b):
        total = a + b
        # Both rays exiting immediately (single-pixel-thin spot): midpoint.
        out = np.full_like(total, 0.5)
        ok = total > 0
        out[ok] = a[ok] / total[ok]
        return out

    pv1 = ratio(p1, p2)
    qh1 = ratio(q1, q2)
    return np.stack([pv1, 1.0 - pv1, qh1, 1.0 - qh1], axis=1)


def rel_coord(mask: np.ndarray, a: LungAnchors, point: tuple[int, int]) -> RelCoord:
    """Relative coordinates of one support pixel."""
    mask = as_mask(mask)
    r, c = point
    if not (0 <= r < mask.shape[0] and 0 <= c < mask.shape[1]) or mask[r, c] == 0:
        raise OutOfSupportError(f"point {point} outside mask support")
    frame = _frame(a)
    vals = _ray_ratios(mask, frame, np.array([[float(r), float(c)]]))[0]
    return RelCoord(*vals)


def rel_coord_grid(mask: np.ndarray, a: LungAnchors, points: np.ndarray) -> np.ndarray:
    """Relative coordinates for an (n, 2) array of real in-support points."""
    return _ray_ratios(as_mask(mask), _frame(a), np.asarray(points, dtype=np.float64))


class OracleMap(NamedTuple):
    """Exhaustive-argmin correspondence from moving to fixed support pixels."""

    moving_points: np.ndarray  # (n, 2) int, row-major order
    fixed_points: np.ndarray  # (n, 2) int, matched one-to-one with moving_points


def oracle_register(moving: np.ndarray, fixed: np.ndarray) -> OracleMap:
    """Match every moving support pixel to the fixed support pixel whose
    relative coordinates are nearest in Euclidean norm.

    Fixed candidates are enumerated in row-major order and the first
    minimum wins, so exact ties resolve to the smaller row, then column.
    """
    moving = as_mask(moving)
    fixed = as_mask(fixed)
    m_pts = support(moving)
    f_pts = support(fixed)
    m_coords = rel_coord_grid(moving, anchors(moving), m_pts.astype(np.float64))
    f_coords = rel_coord_grid(fixed, anchors(fixed), f_pts.astype(np.float64))
    m_sq = np.einsum("ij,ij->i", m_coords, m_coords)
    f_sq = np.einsum("ij,ij->i", f_coords, f_coords)
    d2 = m_sq[:, None] + f_sq[None, :] - 2.0 * (m_coords @ f_coords.T)
    best = np.argmin(d2, axis=1)
    return OracleMap(moving_points=m_pts, fixed_points=f_pts[best])
