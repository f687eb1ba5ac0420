"""Anomaly maps, thresholding, patient scores, AUC, localization scores.

Two different threshold operators coexist on purpose:

* the map threshold keeps a pixel's *signed* value when its absolute
  value strictly exceeds tau (used for anomaly maps and patient scores);
* the localization count uses a signed ``>= tau`` comparison with no
  absolute value, so negative pixels never count.

They mirror two distinct definitions and are intentionally asymmetric.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .validation import as_gray_image, as_mask, as_signed_map, check_same_shape


@dataclass(frozen=True)
class ScoreReport:
    """Per-case scores at one threshold."""

    case_id: str
    label: str
    tau: float
    patient_score: float
    s_intensity: int
    s_binary: int


def anomaly_map(x: np.ndarray, y_hat: np.ndarray, m_x: np.ndarray, m_y: np.ndarray) -> np.ndarray:
    """Signed difference of the masked images: x*m_x - y_hat*m_y."""
    x = as_gray_image(x)
    y_hat = as_gray_image(y_hat)
    m_x = as_mask(m_x)
    m_y = as_mask(m_y)
    check_same_shape(x, y_hat, m_x, m_y)
    return (x.astype(np.int16) * m_x - y_hat.astype(np.int16) * m_y).astype(np.int16)


def threshold_map(v: np.ndarray, tau: float) -> np.ndarray:
    """Zero out pixels with |value| <= tau; keep the signed value otherwise."""
    v = as_signed_map(v)
    if tau < 0:
        raise InputError("tau must be >= 0")
    return np.where(np.abs(v.astype(np.int32)) > tau, v, 0).astype(np.int16)


def patient_score(v: np.ndarray, tau: float) -> float:
    """Euclidean norm of the thresholded anomaly map."""
    kept = threshold_map(v, tau).astype(np.float64)
    return float(np.sqrt((kept**2).sum()))


def auc(normal_scores, abnormal_scores) -> float:
    """Pair-counting (Mann-Whitney) area under the ROC curve.

    Counts abnormal > normal pairs, ties at half weight. Exact and
    deterministic; no curve interpolation.
    """
    normal = np.asarray(list(normal_scores), dtype=np.float64)
    abnormal = np.asarray(list(abnormal_scores), dtype=np.float64)
    if normal.size == 0 or abnormal.size == 0:
        raise InputError("auc needs at least one score in each class")
    wins = (abnormal[:, None] > normal[None, :]).sum()
    ties = (abnormal[:, None] == normal[None, :]).sum()
    return float((wins + 0.5 * ties) / (abnormal.size * normal.size))


def intersect_bbox(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Restrict an anomaly map to the ground-truth box mask (elementwise)."""
    v = as_signed_map(v)
    g = as_mask(g)
    check_same_shape(v, g)
    return (v * g).astype(np.int16)


def s_intensity(z: np.ndarray, tau: float) -> int:
    """Signed sum of the thresholded boxed map (negatives subtract)."""
    return int(threshold_map(z, tau).astype(np.int64).sum())


def s_binary(z: np.ndarray, tau: float) -> int:
    """Count of nonzero pixels with value >= tau (signed comparison)."""
    z = as_signed_map(z)
    if tau < 0:
        raise InputError("tau must be >= 0")
    return int(((z != 0) & (z >= tau)).sum())


def bbox_mask(shape: tuple[int, int], bbox: tuple[int, int, int, int]) -> np.ndarray:
    """Filled {0, 1} mask of an inclusive (rmin, cmin, rmax, cmax) box."""
    rmin, cmin, rmax, cmax = bbox
    h, w = shape
    if not (0 <= rmin <= rmax < h and 0 <= cmin <= cmax < w):
        raise InputError(f"bbox {bbox} does not fit inside {shape}")
    g = np.zeros(shape, dtype=np.uint8)
    g[rmin : rmax + 1, cmin : cmax + 1] = 1
    return g


REPORT_HEADER = "case_id\tlabel\ttau\tpatient_score\ts_intensity\ts_binary"


def write_report(rows: list[ScoreReport], path: str | os.PathLike) -> None:
    """Tab-separated score report with per-tau summary lines appended.

    Localization means are taken over abnormal cases only.
    """
    lines = [
        "# anomaly score report; localization means over abnormal cases only",
        REPORT_HEADER,
    ]
    for r in rows:
        lines.append(
            f"{r.case_id}\t{r.label}\t{r.tau:g}\t{r.patient_score:.6f}"
            f"\t{r.s_intensity}\t{r.s_binary}"
        )
    for tau, summary in summarize(rows).items():
        lines.append(
            f"# tau={tau:g} auc={summary['auc']:.6f}"
            f" n_normal={summary['n_normal']} n_abnormal={summary['n_abnormal']}"
            f" mean_s_intensity={summary['mean_s_intensity']:.3f}"
            f" mean_s_binary={summary['mean_s_binary']:.3f}"
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_report(path: str | os.PathLike) -> list[ScoreReport]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#") or line == REPORT_HEADER:
            continue
        case_id, label, tau, score, s_int, s_bin = line.split("\t")
        rows.append(ScoreReport(case_id, label, float(tau), float(score), int(s_int), int(s_bin)))
    return rows


def summarize(rows: list[ScoreReport]) -> dict[float, dict]:
    """Per-tau AUC of patient scores plus abnormal-mean localization scores."""
    taus = sorted({r.tau for r in rows})
    out = {}
    for tau in taus:
        at_tau = [r for r in rows if r.tau == tau]
        normal = [r.patient_score for r in at_tau if r.label == "normal"]
        abnormal = [r.patient_score for r in at_tau if r.label == "abnormal"]
        ab_rows = [r for r in at_tau if r.label == "abnormal"]
        out[tau] = {
            "auc": auc(normal, abnormal),
            "n_normal": len(normal),
            "n_abnormal": len(abnormal),
            "mean_s_intensity": float(np.mean([r.s_intensity for r in ab_rows])) if ab_rows else 0.0,
            "mean_s_binary": float(np.mean([r.s_binary for r in ab_rows])) if ab_rows else 0.0,
        }
    return out
