"""Fast mask-to-mask registration and image warping.

The transform from a moving mask to a fixed mask is a composition of four
analytic pieces, each invertible in closed form:

1. rotate the moving mask so its lowest-to-apex chord is vertical,
2. scale rows so the chord lengths match, pinning the lowest points to
   the same row,
3. per row of the fixed chord frame, affinely map the moving support
   interval onto the fixed support interval,
4. rotate back with the fixed mask's chord rotation.

Both dense coordinate maps (pull-style: target pixel -> source coordinate)
are evaluated from this one analytic transform, so composing them is exact
up to grid interpolation. The dense grid is a cache; the ``meta`` record
of every map carries the parameters needed to re-evaluate it.

Support intervals are measured on chord-frame rasters with bilinear
membership thresholded at 0.5, endpoints refined to the threshold
crossing. Fixed rows without a populated moving counterpart borrow the
nearest populated row's interval.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import DegenerateMaskError, FormatError, InputError, ShapeError
from .geometry import ChordFrame, bilinear, fill_missing_rows, rotated_membership, row_intervals
from .lungmask import anchors, min_component_area, split_mask
from .validation import as_gray_image, as_mask, support

_WIDTH_EPS = 1e-6

CMAP_MAGIC = b"CMAP"
CMAP_VERSION = 1


@dataclass(frozen=True)
class PairTransform:
    """Analytic moving<->fixed coordinate transform."""

    moving_frame: ChordFrame
    fixed_frame: ChordFrame
    vscale: float
    row0: int
    table: np.ndarray  # (n_rows, 4): moving left/right, fixed left/right
    medial_trim: bool = False

    def _table_at(self, rows: np.ndarray) -> np.ndarray:
        n = len(self.table)
        idx = np.clip(np.asarray(rows, dtype=np.float64) - self.row0, 0.0, n - 1.0)
        i0 = np.minimum(np.floor(idx).astype(np.intp), max(n - 2, 0))
        frac = (idx - i0)[:, None]
        if n == 1:
            return np.repeat(self.table, len(idx), axis=0)
        return self.table[i0] * (1.0 - frac) + self.table[i0 + 1] * frac

    def _slope(self, num_width, den_width, moving_width, fixed_width):
        # medial trim: rows whose moving interval is longer than the fixed
        # one are translated (lateral ends aligned, medial overhang cropped)
        # instead of squeezed.
        ratio = num_width / np.maximum(den_width, _WIDTH_EPS)
        if self.medial_trim:
            return np.where(moving_width >= fixed_width, 1.0, ratio)
        return ratio

    def to_fixed(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) moving-frame points into the fixed frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rr, cc = self.moving_frame.to_rotated(pts[:, 0], pts[:, 1])
        rows = self.fixed_frame.pivot[0] + (rr - self.moving_frame.pivot[0]) * self.vscale
        m_left, m_right, f_left, f_right = self._table_at(rows).T
        wm = m_right - m_left
        wf = f_right - f_left
        cols = f_left + (cc - m_left) * self._slope(wf, wm, wm, wf)
        if not self.medial_trim:
            cols = np.where(wm < _WIDTH_EPS, 0.5 * (f_left + f_right), cols)
        orows, ocols = self.fixed_frame.to_original(rows, cols)
        return np.stack([orows, ocols], axis=1)

    def to_moving(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) fixed-frame points into the moving frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rr, cc = self.fixed_frame.to_rotated(pts[:, 0], pts[:, 1])
        m_left, m_right, f_left, f_right = self._table_at(rr).T
        wm = m_right - m_left
        wf = f_right - f_left
        cols = m_left + (cc - f_left) * self._slope(wm, wf, wm, wf)
        if not self.medial_trim:
            cols = np.where(wf < _WIDTH_EPS, 0.5 * (m_left + m_right), cols)
        rows = self.moving_frame.pivot[0] + (rr - self.fixed_frame.pivot[0]) / self.vscale
        orows, ocols = self.moving_frame.to_original(rows, cols)
        return np.stack([orows, ocols], axis=1)

    def to_meta(self) -> dict[str, str]:
        table = ";".join(",".join(repr(float(v)) for v in row) for row in self.table)
        return {
            "mov_pivot": f"{self.moving_frame.pivot[0]!r},{self.moving_frame.pivot[1]!r}",
            "mov_angle": repr(self.moving_frame.angle),
            "mov_chord": repr(self.moving_frame.chord),
            "fix_pivot": f"{self.fixed_frame.pivot[0]!r},{self.fixed_frame.pivot[1]!r}",
            "fix_angle": repr(self.fixed_frame.angle),
            "fix_chord": repr(self.fixed_frame.chord),
            "vscale": repr(self.vscale),
            "row0": str(self.row0),
            "medial_trim": "1" if self.medial_trim else "0",
            "table": table,
        }

    @classmethod
    def from_meta(cls, meta: dict[str, str]) -> "PairTransform":
        def pivot(key):
            r, c = meta[key].split(",")
            return (float(r), float(c))

        table = np.array(
            [[float(v) for v in row.split(",")] for row in meta["table"].split(";")]
        )
        return cls(
            moving_frame=ChordFrame(pivot("mov_pivot"), float(meta["mov_angle"]), float(meta["mov_chord"])),
            fixed_frame=ChordFrame(pivot("fix_pivot"), float(meta["fix_angle"]), float(meta["fix_chord"])),
            vscale=float(meta["vscale"]),
            row0=int(meta["row0"]),
            table=table,
            medial_trim=meta.get("medial_trim", "0") == "1",
        )


@dataclass(frozen=True)
class CoordMap:
    """Dense pull-style resampling field: target pixel -> source coordinate."""

    target_height: int
    target_width: int
    source_height: int
    source_width: int
    coords: np.ndarray  # float32 (th, tw, 2), NaN marks pixels off the support
    meta: dict[str, str]

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.coords[..., 0])


@dataclass(frozen=True)
class RegPair:
    """Forward (fixed-frame target) and inverse (moving-frame target) maps."""

    forward: CoordMap
    inverse: CoordMap
    transform: PairTransform


def _chord_frame(mask: np.ndarray, min_area: int | None, role: str) -> ChordFrame:
    area = min_component_area(mask.shape) if min_area is None else min_area
    n_support = int(mask.sum())
    if n_support < area:
        raise DegenerateMaskError(f"{role} mask support {n_support} below minimum {area}")
    a = anchors(mask)
    if a.chord <= 0:
        raise DegenerateMaskError(f"{role} mask has zero chord length")
    return ChordFrame.from_anchors(a.lowest, a.apex, a.chord)


def _rotated_bounds(mask, frame, row_map=None):
    pts = support(mask).astype(np.float64)
    rr, cc = frame.to_rotated(pts[:, 0], pts[:, 1])
    if row_map is not None:
        rr = row_map(rr)
    return (
        int(math.floor(rr.min())) - 2,
        int(math.ceil(rr.max())) + 2,
        int(math.floor(cc.min())) - 2,
        int(math.ceil(cc.max())) + 2,
    )


def build_transform(
    moving: np.ndarray,
    fixed: np.ndarray,
    min_area: int | None = None,
    medial_trim: bool = False,
) -> PairTransform:
    """Derive the analytic transform for a (moving, fixed) mask pair."""
    moving = as_mask(moving)
    fixed = as_mask(fixed)
    mframe = _chord_frame(moving, min_area, "moving")
    fframe = _chord_frame(fixed, min_area, "fixed")
    vscale = fframe.chord / mframe.chord

    fr0, fr1, fc0, fc1 = _rotated_bounds(fixed, fframe)
    rows = np.arange(fr0, fr1 + 1, dtype=np.float64)
    f_cols = np.arange(fc0, fc1 + 1, dtype=np.float64)
    f_member = rotated_membership(fixed, fframe, rows, f_cols)
    f_table = fill_missing_rows(row_intervals(f_member, f_cols))

    def to_moving_rows(rr):
        return mframe.pivot[0] + (rr - fframe.pivot[0]) / vscale

    def to_fixed_rows(rr):
        return fframe.pivot[0] + (rr - mframe.pivot[0]) * vscale

    _, _, mc0, mc1 = _rotated_bounds(moving, mframe, row_map=to_fixed_rows)
    m_cols = np.arange(mc0, mc1 + 1, dtype=np.float64)
    m_member = rotated_membership(moving, mframe, rows, m_cols, row_map=to_moving_rows)
    m_table = fill_missing_rows(row_intervals(m_member, m_cols))

    table = np.hstack([m_table, f_table])
    return PairTransform(mframe, fframe, vscale, fr0, table, medial_trim)


def _dense_map(
    transform: PairTransform,
    direction: str,
    target_mask: np.ndarray,
    source_shape: tuple[int, int],
) -> CoordMap:
    pts = support(target_mask).astype(np.float64)
    src = transform.to_moving(pts) if direction == "forward" else transform.to_fixed(pts)
    th, tw = target_mask.shape
    coords = np.full((th, tw, 2), np.nan, dtype=np.float32)
    idx = support(target_mask)
    coords[idx[:, 0], idx[:, 1]] = src.astype(np.float32)
    meta = transform.to_meta()
    meta["direction"] = direction
    return CoordMap(th, tw, source_shape[0], source_shape[1], coords, meta)


def reg(moving: np.ndarray, fixed: np.ndarray, min_area: int | None = None) -> RegPair:
    """Register a moving mask onto a fixed mask.

    Returns the pair of dense pull maps: ``forward`` warps moving-frame
    images onto the fixed support, ``inverse`` warps them back. Both are
    evaluations of one analytic transform, so they are mutual inverses up
    to grid discretisation.
    """
    moving = as_mask(moving)
    fixed = as_mask(fixed)
    transform = build_transform(moving, fixed, min_area=min_area)
    forward = _dense_map(transform, "forward", fixed, moving.shape)
    inverse = _dense_map(transform, "inverse", moving, fixed.shape)
    return RegPair(forward=forward, inverse=inverse, transform=transform)


def warp(img: np.ndarray, cmap: CoordMap, fill: int = 0, nearest: bool = False) -> np.ndarray:
    """Pull-resample an image through a coordinate map.

    Valid target pixels sample the image at their source coordinate
    (bilinear by default, clamped to the image bounds); invalid pixels
    take ``fill``.
    """
    img = as_gray_image(img)
    if img.shape != (cmap.source_height, cmap.source_width):
        raise ShapeError(
            f"image shape {img.shape} does not match map source frame "
            f"({cmap.source_height}, {cmap.source_width})"
        )
    out = np.full((cmap.target_height, cmap.target_width), fill, dtype=np.uint8)
    valid = cmap.valid
    if not valid.any():
        return out
    rows = cmap.coords[..., 0][valid].astype(np.float64)
    cols = cmap.coords[..., 1][valid].astype(np.float64)
    if nearest:
        ri = np.clip(np.rint(rows), 0, img.shape[0] - 1).astype(np.intp)
        ci = np.clip(np.rint(cols), 0, img.shape[1] - 1).astype(np.intp)
        out[valid] = img[ri, ci]
    else:
        vals = bilinear(img, rows, cols, clamp=True)
        out[valid] = np.clip(np.rint(vals), 0, 255).astype(np.uint8)
    return out


def warp_mask(mask: np.ndarray, cmap: CoordMap) -> np.ndarray:
    """Nearest-neighbour mask warp; invalid target pixels become 0."""
    mask = as_mask(mask)
    if mask.shape != (cmap.source_height, cmap.source_width):
        raise ShapeError(
            f"mask shape {mask.shape} does not match map source frame "
            f"({cmap.source_height}, {cmap.source_width})"
        )
    return warp(mask, cmap, fill=0, nearest=True)


def evaluate_meta(cmap: CoordMap) -> np.ndarray:
    """Re-evaluate a map's source coordinates from its meta record.

    Returns a coordinate grid shaped like ``cmap.coords``; the dense grid
    is a cache of exactly this evaluation.
    """
    transform = PairTransform.from_meta(cmap.meta)
    idx = np.argwhere(cmap.valid)
    pts = idx.astype(np.float64)
    src = transform.to_moving(pts) if cmap.meta["direction"] == "forward" else transform.to_fixed(pts)
    coords = np.full_like(cmap.coords, np.nan)
    coords[idx[:, 0], idx[:, 1]] = src.astype(np.float32)
    return coords


def write_coord_map(cmap: CoordMap, path: str | os.PathLike) -> None:
    """Serialize a CoordMap; read/write round-trips are bit-exact."""
    header = CMAP_MAGIC + struct.pack(
        "<HIIII",
        CMAP_VERSION,
        cmap.target_height,
        cmap.target_width,
        cmap.source_height,
        cmap.source_width,
    )
    body = np.ascontiguousarray(cmap.coords, dtype="<f4").tobytes()
    meta_text = "".join(f"{k}={v}\n" for k, v in sorted(cmap.meta.items())).encode("utf-8")
    Path(path).write_bytes(header + body + struct.pack("<I", len(meta_text)) + meta_text)


def read_coord_map(path: str | os.PathLike) -> CoordMap:
    data = Path(path).read_bytes()
    if data[:4] != CMAP_MAGIC:
        raise FormatError(f"not a coordinate map file (magic {data[:4]!r}): {path}")
    version, th, tw, sh, sw = struct.unpack_from("<HIIII", data, 4)
    if version != CMAP_VERSION:
        raise FormatError(f"unsupported coordinate map version {version}: {path}")
    pos = 4 + struct.calcsize("<HIIII")
    n_bytes = th * tw * 2 * 4
    if len(data) < pos + n_bytes + 4:
        raise FormatError(f"truncated coordinate map: {path}")
    coords = np.frombuffer(data, dtype="<f4", count=th * tw * 2, offset=pos).reshape(th, tw, 2).copy()
    pos += n_bytes
    (meta_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) != pos + meta_len:
        raise FormatError(f"coordinate map length mismatch: {path}")
    meta = {}
    for line in data[pos:].decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        meta[key] = value
    return CoordMap(th, tw, sh, sw, coords, meta)


def export_pseudo_pairs(cases, fixed_mask: np.ndarray, out_dir) -> list[dict]:
    """Write (moving, registered-moving) image pairs for every case side.

    The registered image of a case is its own pseudo-fixed counterpart, so
    the output directory is a ready-made training set for an external
    learned registration model. Failing cases are recorded and skipped.
    Returns the pairing records; also writes them to ``pairs.tsv``.
    """
    from .errors import CxrError
    from .pgm import read_mask, read_pgm, write_pgm

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fixed_pair = split_mask(as_mask(fixed_mask))
    records = []
    for case in cases:
        try:
            img = read_pgm(case.image_path)
            mask = read_mask(case.mask_path)
            if img.shape != mask.shape:
                raise ShapeError("image and mask shapes differ", case.case_id)
            pair = split_mask(mask)
            for side in ("l", "r"):
                moving = (img * pair.side(side)).astype(np.uint8)
                rp = reg(pair.side(side), fixed_pair.side(side))
                pseudofixed = warp(moving, rp.forward)
                moving_path = out_dir / f"{case.case_id}_{side}_moving.pgm"
                fixed_path = out_dir / f"{case.case_id}_{side}_pseudofixed.pgm"
                write_pgm(moving, moving_path)
                write_pgm(pseudofixed, fixed_path)
                records.append(
                    {
                        "case_id": case.case_id,
                        "side": side,
                        "status": "ok",
                        "moving": moving_path.name,
                        "pseudofixed": fixed_path.name,
                    }
                )
        except CxrError as exc:
            records.append(
                {
                    "case_id": case.case_id,
                    "side": "-",
                    "status": f"skipped:{exc.code}",
                    "moving": "-",
                    "pseudofixed": "-",
                }
            )
    lines = ["case_id\tside\tstatus\tmoving\tpseudofixed"]
    lines += ["\t".join(r[k] for k in ("case_id", "side", "status", "moving", "pseudofixed")) for r in records]
    (out_dir / "pairs.tsv").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return records


class MaskRegistration(BaseEstimator):
    """Estimator-style facade over mask registration.

    The fixed mask is a constructor parameter; ``fit`` takes the moving
    mask and derives the coordinate maps, ``transform`` warps moving-frame
    images into the fixed frame, ``inverse_transform`` warps them back.

    >>> est = MaskRegistration(fixed_mask).fit(moving_mask)
    >>> registered = est.transform(image)
    """

    def __init__(self, fixed_mask=None, min_area=None, fill=0):
        self.fixed_mask = fixed_mask
        self.min_area = min_area
        self.fill = fill

    def fit(self, X, y=None):
        if self.fixed_mask is None:
            raise InputError("MaskRegistration requires a fixed_mask")
        self.pair_ = reg(as_mask(X), as_mask(self.fixed_mask), min_area=self.min_area)
        return self

    def _check_fitted(self):
        if not hasattr(self, "pair_"):
            raise NotFittedError("MaskRegistration is not fitted; call fit(moving_mask) first")

    def transform(self, X):
        self._check_fitted()
        return warp(X, self.pair_.forward, fill=self.fill)

    def inverse_transform(self, X):
        self._check_fitted()
        return warp(X, self.pair_.inverse, fill=self.fill)
