"""Deterministic synthetic chest-image generator for desk-scale testing.

Lung masks are stylized silhouettes: straight vertical sides, a shallow
elliptical top dome with a pointed crown, and a gently rising diaphragm
with a pointed inferior spike. The crown and spike sit on one exact pixel
column, which keeps the chord anchors (lowest point, apex) unambiguous
under rasterization; boundary wobble is pinned to zero near that column.
Boundary segments stay near-vertical or near-horizontal, the regime where
per-pixel boundary-ray coordinates are well conditioned on a raster grid.

Images are a smooth low-frequency base texture in [40, 160] shared per
dataset, plus an optional lesion disc with a tapered edge. Everything is
a pure function of (seed, spec), reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .manifest import CaseManifest, save_manifest
from .pgm import write_mask, write_pgm

TEXTURE_LOW = 40
TEXTURE_HIGH = 160


@dataclass(frozen=True)
class BlobSpec:
    """One lung silhouette. ``center_col`` is the anchor column (integer)."""

    center_row: float
    center_col: int
    half_width: float
    height: float
    dome_frac: float = 0.09
    wing_frac: float = 0.11
    crown_px: float = 2.5
    spike_px: float = 2.5
    wobble_px: float = 0.5


@dataclass(frozen=True)
class LesionSpec:
    center: tuple[float, float]
    radius: float
    delta: int = 80
    edge: float = 4.5


@dataclass(frozen=True)
class SyntheticSpec:
    height: int
    width: int
    right: BlobSpec
    left: BlobSpec
    lesion: LesionSpec | None = None
    texture_seed: int | None = None


@dataclass(frozen=True)
class CaseSpec:
    case_id: str
    label: str
    spec: SyntheticSpec


def blob_mask(shape: tuple[int, int], spec: BlobSpec, rng: np.random.Generator) -> np.ndarray:
    """Rasterize one lung silhouette.

    The wobble coefficients (four normals) are drawn from ``rng``; the
    perturbation fades to zero within 2 px of the anchor column so the
    crown and spike pixels stay put.
    """
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    x = cols - spec.center_col
    y = rows - spec.center_row
    b = spec.half_width
    height = spec.height
    xn = np.clip(x / b, -1.0, 1.0)
    dome = spec.dome_frac * height * (1.0 - np.sqrt(np.clip(1.0 - xn**2, 0.0, 1.0)))
    wing = spec.wing_frac * height * np.abs(xn)
    peak = np.clip(1.0 - np.abs(x) / 1.5, 0.0, 1.0)
    cw = rng.normal(size=4)
    pin = np.clip((np.abs(x) - 2.0) / 3.0, 0.0, 1.0)
    wobble_top = spec.wobble_px * pin * (cw[0] * np.sin(math.pi * xn) + cw[1] * np.cos(2 * math.pi * xn)) / 2.0
    wobble_bot = spec.wobble_px * pin * (cw[2] * np.sin(math.pi * xn) + cw[3] * np.cos(2 * math.pi * xn)) / 2.0
    y_top = -height / 2.0 + dome - spec.crown_px * peak + wobble_top
    y_bot = height / 2.0 - wing + spec.spike_px * peak + wobble_bot
    inside = (np.abs(x) <= b) & (y >= y_top) & (y <= y_bot)
    return inside.astype(np.uint8)


def _texture(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Smooth low-frequency field scaled exactly to [TEXTURE_LOW, TEXTURE_HIGH]."""
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w]
    field = np.zeros(shape)
    for _ in range(4):
        wavelength = rng.uniform(0.4, 1.0) * min(h, w)
        direction = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.5, 1.0)
        field += amp * np.sin(
            2.0 * math.pi * (rows * math.cos(direction) + cols * math.sin(direction)) / wavelength
            + phase
        )
    lo, hi = field.min(), field.max()
    return TEXTURE_LOW + (TEXTURE_HIGH - TEXTURE_LOW) * (field - lo) / (hi - lo)


def base_texture(shape: tuple[int, int], texture_seed: int) -> np.ndarray:
    """The shared base texture as a uint8 image (the 'template')."""
    rng = np.random.default_rng(texture_seed)
    return np.round(_texture(shape, rng)).astype(np.uint8)


def _touching(a: np.ndarray, b: np.ndarray) -> bool:
    padded = np.pad(a, 1)
    dilated = np.zeros_like(padded)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            dilated[1 + dr : 1 + dr + a.shape[0], 1 + dc : 1 + dc + a.shape[1]] |= a
    return bool((dilated[1:-1, 1:-1] & b).any())


def gen_synthetic(
    seed: int, spec: SyntheticSpec
) -> tuple[np.ndarray, np.ndarray, tuple[int, int, int, int] | None]:
    """Generate (image, mask, bbox) deterministically from (seed, spec).

    The mask is the union of the two lung blobs; the image is the base
    texture plus the lesion contribution, which is confined to the lung
    containing the lesion center. The bbox is the tight box around the
    lesion support, absent when no lesion is requested.
    """
    shape = (spec.height, spec.width)
    rng = np.random.default_rng(seed)
    right = blob_mask(shape, spec.right, rng)
    left = blob_mask(shape, spec.left, rng)
    if _touching(right, left):
        raise SpecError("lung blobs overlap or touch")
    mask = (right | left).astype(np.uint8)

    texture_seed = spec.texture_seed if spec.texture_seed is not None else seed
    img = _texture(shape, np.random.default_rng(texture_seed))

    bbox = None
    if spec.lesion is not None and spec.lesion.radius > 0:
        les = spec.lesion
        crow, ccol = int(round(les.center[0])), int(round(les.center[1]))
        if not (0 <= crow < spec.height and 0 <= ccol < spec.width) or mask[crow, ccol] == 0:
            raise SpecError(f"lesion center {les.center} is not inside a lung")
        host = right if right[crow, ccol] else left
        rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]
        dist = np.hypot(rows - les.center[0], cols - les.center[1])
        if les.edge > 0:
            profile = np.clip((les.radius - dist) / les.edge, 0.0, 1.0)
        else:
            profile = (dist <= les.radius).astype(np.float64)
        profile *= host
        support = profile > 0
        if not support.any():
            raise SpecError("lesion support is empty")
        img = img + les.delta * profile
        rs, cs = np.nonzero(support)
        bbox = (int(rs.min()), int(cs.min()), int(rs.max()), int(cs.max()))

    return np.round(np.clip(img, 0, 255)).astype(np.uint8), mask, bbox


def default_lungs(height: int, width: int) -> tuple[BlobSpec, BlobSpec]:
    """Baseline lung geometry: anatomical right (image-left) is narrower."""
    scale = height / 256.0
    right = BlobSpec(
        center_row=0.52 * height,
        center_col=int(round(0.30 * width)),
        half_width=0.148 * width,
        height=0.67 * height,
        crown_px=6.0 * scale,
        spike_px=6.0 * scale,
        wobble_px=1.5 * scale,
    )
    left = BlobSpec(
        center_row=0.52 * height,
        center_col=int(round(0.70 * width)),
        half_width=0.175 * width,
        height=0.69 * height,
        crown_px=6.0 * scale,
        spike_px=6.0 * scale,
        wobble_px=1.5 * scale,
    )
    return right, left


def _case_seed(seed: int, index: int) -> int:
    return (seed * 1_000_003 + 7919 * index + 1) & 0x7FFFFFFF


def _jitter_blob(blob: BlobSpec, rng: np.random.Generator) -> BlobSpec:
    return BlobSpec(
        center_row=blob.center_row + rng.uniform(-4, 4),
        center_col=blob.center_col + int(rng.integers(-3, 4)),
        half_width=blob.half_width * rng.uniform(0.94, 1.06),
        height=blob.height * rng.uniform(0.94, 1.06),
        dome_frac=rng.uniform(0.082, 0.098),
        wing_frac=rng.uniform(0.10, 0.12),
        crown_px=blob.crown_px,
        spike_px=blob.spike_px,
        wobble_px=blob.wobble_px,
    )


def _place_lesion(blob: BlobSpec, rng: np.random.Generator, radius_range, delta: int) -> LesionSpec:
    dx = rng.uniform(-0.6, 0.6) * blob.half_width
    dy = rng.uniform(-0.36, 0.36) * blob.height
    return LesionSpec(
        center=(blob.center_row + dy, blob.center_col + dx),
        radius=rng.uniform(*radius_range),
        delta=delta,
    )


def make_case_specs(
    seed: int,
    count: int,
    lesion_rate: float,
    height: int = 256,
    width: int = 256,
    lesion_delta: int = 80,
    lesion_radius: tuple[float, float] = (8.0, 14.0),
) -> tuple[SyntheticSpec, list[CaseSpec]]:
    """Build the fixed-reference spec plus ``count`` jittered case specs.

    All cases share one base texture (seeded by ``seed``) so a template
    backend can use it as the universal 'normal' appearance. Which cases
    receive a lesion is a seeded draw of ``round(count * lesion_rate)``
    indices.
    """
    base_right, base_left = default_lungs(height, width)
    fixed = SyntheticSpec(height, width, base_right, base_left, texture_seed=seed)

    n_abnormal = round(count * lesion_rate)
    order = np.random.default_rng(seed).permutation(count)
    abnormal_idx = set(int(i) for i in order[:n_abnormal])

    cases = []
    for i in range(count):
        rng = np.random.default_rng(_case_seed(seed, i) ^ 0x9E3779B9)
        right = _jitter_blob(base_right, rng)
        left = _jitter_blob(base_left, rng)
        lesion = None
        label = "normal"
        if i in abnormal_idx:
            label = "abnormal"
            host = right if rng.uniform() < 0.5 else left
            lesion = _place_lesion(host, rng, lesion_radius, lesion_delta)
        spec = SyntheticSpec(height, width, right, left, lesion=lesion, texture_seed=seed)
        cases.append(CaseSpec(case_id=f"case{i:03d}", label=label, spec=spec))
    return fixed, cases


def generate_dataset(out_dir, seed: int, count: int, lesion_rate: float, **spec_kwargs):
    """Write a complete synthetic dataset: cases, manifest, fixed mask, template.

    Returns (manifest_path, fixed_mask_path, template_path).
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fixed_spec, cases = make_case_specs(seed, count, lesion_rate, **spec_kwargs)

    _, fixed_mask, _ = gen_synthetic(_case_seed(seed, -1), fixed_spec)
    fixed_path = out_dir / "fixed_mask.pgm"
    write_mask(fixed_mask, fixed_path)

    template = base_texture((fixed_spec.height, fixed_spec.width), seed)
    template_path = out_dir / "template.pgm"
    write_pgm(template, template_path)

    records = []
    for i, case in enumerate(cases):
        img, mask, bbox = gen_synthetic(_case_seed(seed, i), case.spec)
        image_path = out_dir / f"{case.case_id}.pgm"
        mask_path = out_dir / f"{case.case_id}_mask.pgm"
        write_pgm(img, image_path)
        write_mask(mask, mask_path)
        records.append(CaseManifest(case.case_id, image_path, mask_path, case.label, bbox))
    manifest_path = out_dir / "manifest.tsv"
    save_manifest(records, manifest_path)
    return manifest_path, fixed_path, template_path
