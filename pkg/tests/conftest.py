"""Shared fixtures and independent reference implementations.

The reference helpers here deliberately avoid the package's geometry
kernel: membership interpolation goes through scipy.ndimage, ray
marching is a plain loop at 0.1 px steps, and connected components use a
hand-rolled breadth-first flood fill. They exist to cross-check the
package, so they must not share its code paths.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np
import pytest
from scipy import ndimage

from cxranomaly.synthetic import BlobSpec, blob_mask


def make_lung(size: int, seed: int, jitter_seed: int | None = None) -> np.ndarray:
    """One seeded single-lung mask of the standard test family."""
    rng = np.random.default_rng(seed if jitter_seed is None else jitter_seed)
    scale = size / 48.0
    spec = BlobSpec(
        center_row=size / 2 + rng.uniform(-1.5, 1.5) * scale,
        center_col=int(size * 0.48) + int(rng.integers(-1, 2)) * int(round(scale)),
        half_width=size * 0.17 * rng.uniform(0.9, 1.1),
        height=size * 0.67 * rng.uniform(0.9, 1.1),
        dome_frac=rng.uniform(0.082, 0.098),
        wing_frac=rng.uniform(0.10, 0.12),
        crown_px=2.5 * scale,
        spike_px=2.5 * scale,
        wobble_px=0.5 * scale,
    )
    return blob_mask((size, size), spec, np.random.default_rng(seed))


def make_lung_pair(size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    return make_lung(size, 1000 + seed), make_lung(size, 2000 + seed)


def membership_ref(mask: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear membership via scipy (zero outside)."""
    pts = np.atleast_2d(points)
    return ndimage.map_coordinates(
        mask.astype(np.float64), [pts[:, 0], pts[:, 1]], order=1, mode="constant", cval=0.0
    )


def ray_march_ref(mask: np.ndarray, start, direction, step: float = 0.1) -> float:
    """Reference boundary distance: fixed-step march, last inside step."""
    h, w = mask.shape
    limit = math.hypot(h, w) + 2
    t = step
    last_inside = 0.0
    while t <= limit:
        p = (start[0] + t * direction[0], start[1] + t * direction[1])
        if membership_ref(mask, np.array([p]))[0] < 0.5:
            return last_inside
        last_inside = t
        t += step
    return last_inside


def rel_coord_ref(mask: np.ndarray, point) -> np.ndarray:
    """Independent relative coordinates: own anchors scan, 0.1 px march."""
    padded = np.pad(mask, 1)
    interior = (
        (padded[:-2, 1:-1] > 0)
        & (padded[2:, 1:-1] > 0)
        & (padded[1:-1, :-2] > 0)
        & (padded[1:-1, 2:] > 0)
    )
    bpts = np.argwhere((mask > 0) & ~interior)
    # lowest: max row, then min col; apex: max distance, then min row, min col
    order = sorted(map(tuple, bpts), key=lambda p: (-p[0], p[1]))
    lowest = order[0]
    d2 = [(-((p[0] - lowest[0]) ** 2 + (p[1] - lowest[1]) ** 2), p[0], p[1]) for p in map(tuple, bpts)]
    apex = tuple(sorted(d2)[0][1:])
    alpha = math.atan2(apex[1] - lowest[1], apex[0] - lowest[0])
    phi = math.pi - alpha
    down = (math.cos(phi), -math.sin(phi))
    right = (math.sin(phi), math.cos(phi))
    p1 = ray_march_ref(mask, point, down)
    p2 = ray_march_ref(mask, point, (-down[0], -down[1]))
    q1 = ray_march_ref(mask, point, (-right[0], -right[1]))
    q2 = ray_march_ref(mask, point, right)
    pv = p1 / (p1 + p2) if p1 + p2 > 0 else 0.5
    qh = q1 / (q1 + q2) if q1 + q2 > 0 else 0.5
    return np.array([pv, 1 - pv, qh, 1 - qh])


def flood_components(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """8-connected components by breadth-first flood fill."""
    seen = np.zeros(mask.shape, dtype=bool)
    comps = []
    for r0, c0 in np.argwhere(mask):
        if seen[r0, c0]:
            continue
        comp = set()
        queue = deque([(int(r0), int(c0))])
        seen[r0, c0] = True
        while queue:
            r, c = queue.popleft()
            comp.add((r, c))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if (
                        0 <= rr < mask.shape[0]
                        and 0 <= cc < mask.shape[1]
                        and mask[rr, cc]
                        and not seen[rr, cc]
                    ):
                        seen[rr, cc] = True
                        queue.append((rr, cc))
        comps.append(comp)
    return comps


@pytest.fixture
def lung_pair_48():
    return make_lung_pair(48, 3)


@pytest.fixture
def lung_pair_256():
    return make_lung_pair(256, 3)
