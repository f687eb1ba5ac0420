"""End-to-end orchestration: dataset preparation, translation backends,
test-time register/translate/deregister composition, and evaluation.

The translation model itself is pluggable. Three backend kinds:

* ``identity``  -- returns its input (sanity baseline);
* ``template``  -- returns a stored per-side normal image, masked to the
  side support (a zero-learning stand-in for a trained translator);
* ``external``  -- file-exchange protocol: the input is written as a PGM,
  a user command is invoked with ``{in}``/``{out}`` substituted, and the
  output PGM of identical dimensions is read back. Any external ML stack
  can plug in with zero shared dependencies.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import ba_l_to_r, ba_r_to_l
from .errors import BackendError, CxrError, InputError, ShapeError
from .lungmask import LungPair, split_mask
from .manifest import CaseManifest
from .metrics import (
    ScoreReport,
    anomaly_map,
    bbox_mask,
    intersect_bbox,
    patient_score,
    s_binary,
    s_intensity,
    summarize,
    threshold_map,
    write_report,
)
from .pgm import read_mask, read_pgm, write_pgm
from .registration import reg, warp
from .validation import as_gray_image, as_mask

BACKEND_KINDS = ("identity", "template", "external")
DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class BackendSpec:
    """Configuration of the translation stage."""

    kind: str = "identity"
    template_left: Path | None = None
    template_right: Path | None = None
    command: str | None = None
    exchange_dir: Path | None = None
    timeout: float = DEFAULT_TIMEOUT

    def validate(self) -> "BackendSpec":
        if self.kind not in BACKEND_KINDS:
            raise InputError(f"unknown backend kind {self.kind!r}")
        if self.kind == "template" and (self.template_left is None or self.template_right is None):
            raise InputError("template backend needs template images for both sides")
        if self.kind == "external":
            if not self.command:
                raise InputError("external backend needs a command template")
            if "{in}" not in self.command or "{out}" not in self.command:
                raise InputError("external command template must contain {in} and {out}")
            if self.exchange_dir is None:
                raise InputError("external backend needs an exchange directory")
        return self


def _run_external(img: np.ndarray, spec: BackendSpec, case_id: str | None) -> tuple[np.ndarray, str]:
    exchange = Path(spec.exchange_dir)
    exchange.mkdir(parents=True, exist_ok=True)
    token = uuid.uuid4().hex
    in_path = exchange / f"{token}_in.pgm"
    out_path = exchange / f"{token}_out.pgm"
    write_pgm(img, in_path)
    argv = [
        t.replace("{in}", str(in_path)).replace("{out}", str(out_path))
        for t in shlex.split(spec.command)
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=spec.timeout)
    except subprocess.TimeoutExpired as exc:
        raise BackendError(f"backend timed out after {spec.timeout}s: {argv}", case_id) from exc
    except OSError as exc:
        raise BackendError(f"backend failed to start: {exc}", case_id) from exc
    stderr = proc.stderr.decode("utf-8", errors="replace")
    try:
        if proc.returncode != 0:
            raise BackendError(
                f"backend exited {proc.returncode}: {argv}; stderr: {stderr.strip()}", case_id
            )
        if not out_path.is_file():
            raise BackendError(f"backend produced no output file {out_path}", case_id)
        out = read_pgm(out_path)
        if out.shape != img.shape:
            raise BackendError(
                f"backend output shape {out.shape} != input shape {img.shape}", case_id
            )
    finally:
        for p in (in_path, out_path):
            p.unlink(missing_ok=True)
    return out, stderr


def translate(
    img: np.ndarray,
    side: str,
    backend: BackendSpec,
    side_mask: np.ndarray | None = None,
    case_id: str | None = None,
    log: list[str] | None = None,
) -> np.ndarray:
    """Run the translation backend on one fixed-frame side image.

    ``log``, when given, collects the external backend's stderr output.
    """
    img = as_gray_image(img)
    if side not in ("l", "r"):
        raise InputError(f"side must be 'l' or 'r', got {side!r}")
    backend.validate()
    if backend.kind == "identity":
        return img.copy()
    if backend.kind == "template":
        path = backend.template_left if side == "l" else backend.template_right
        template = read_pgm(path)
        if template.shape != img.shape:
            raise ShapeError(f"template shape {template.shape} != image shape {img.shape}", case_id)
        if side_mask is not None:
            template = (template * as_mask(side_mask)).astype(np.uint8)
        return template
    out, stderr = _run_external(img, backend, case_id)
    if log is not None and stderr:
        log.append(f"[{case_id or '-'}:{side}] {stderr.strip()}")
    return out


@dataclass
class PreparedDataset:
    """File-level outcome of dataset preparation (fixed-frame side images)."""

    x_right: list[dict] = field(default_factory=list)
    x_left: list[dict] = field(default_factory=list)
    y_right: list[dict] = field(default_factory=list)
    y_left: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def subset(self, name: str) -> list[dict]:
        return {"Xr": self.x_right, "Xl": self.x_left, "Yr": self.y_right, "Yl": self.y_left}[name]


def _load_case(case: CaseManifest) -> tuple[np.ndarray, LungPair]:
    img = read_pgm(case.image_path)
    mask = read_mask(case.mask_path)
    if img.shape != mask.shape:
        raise ShapeError(f"image {img.shape} vs mask {mask.shape}", case.case_id)
    return img, split_mask(mask)


def _tag_case(exc: CxrError, case_id: str) -> CxrError:
    if exc.case_id is None:
        exc.case_id = case_id
    return exc


def _prepare_case(case: CaseManifest, fixed: LungPair, img_dir: Path) -> list[dict]:
    img, sides = _load_case(case)
    registered = {}
    for side in ("l", "r"):
        pair = reg(sides.side(side), fixed.side(side))
        moving = (img * sides.side(side)).astype(np.uint8)
        registered[side] = warp(moving, pair.forward)
    items = []

    def emit(side: str, image: np.ndarray, augmented: bool):
        kind = "aug" if augmented else "reg"
        name = f"{case.case_id}_{side}_{kind}.pgm"
        write_pgm(image, img_dir / name)
        items.append(
            {
                "case_id": case.case_id,
                "side": side,
                "augmented": augmented,
                "label": case.label,
                "path": img_dir / name,
            }
        )

    emit("l", registered["l"], False)
    emit("r", registered["r"], False)
    if case.abnormal:
        emit("l", ba_r_to_l(registered["r"], fixed.left, fixed.right), True)
        emit("r", ba_l_to_r(registered["l"], fixed.right, fixed.left), True)
    return items


def prepare(
    cases: list[CaseManifest],
    fixed_mask: np.ndarray,
    out_dir: str | os.PathLike,
    jobs: int | None = None,
) -> PreparedDataset:
    """Build the fixed-frame training set.

    Abnormal cases contribute their registered side images plus the
    bilateral augmentations (twice the count); normal cases contribute
    registered side images only. Per-case failures are recorded in the
    dataset manifest and skipped.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    fixed = split_mask(as_mask(fixed_mask))

    def work(case: CaseManifest):
        try:
            return _prepare_case(case, fixed, img_dir)
        except CxrError as exc:
            return _tag_case(exc, case.case_id)

    results = _map_cases(work, cases, jobs)

    ds = PreparedDataset()
    for case, result in zip(cases, results):
        if isinstance(result, CxrError):
            ds.skipped.append({"case_id": case.case_id, "reason": result.code, "message": str(result)})
            continue
        for item in result:
            target = {
                ("abnormal", "r"): ds.x_right,
                ("abnormal", "l"): ds.x_left,
                ("normal", "r"): ds.y_right,
                ("normal", "l"): ds.y_left,
            }[(item["label"], item["side"])]
            target.append(item)

    lines = ["subset\tcase_id\tside\taugmented\tpath"]
    for name in ("Xr", "Xl", "Yr", "Yl"):
        for item in ds.subset(name):
            rel = os.path.relpath(item["path"], out_dir)
            lines.append(f"{name}\t{item['case_id']}\t{item['side']}\t{str(item['augmented']).lower()}\t{rel}")
    for skip in ds.skipped:
        lines.append(f"skipped\t{skip['case_id']}\t-\t-\t{skip['reason']}:{skip['message']}")
    (out_dir / "dataset_manifest.tsv").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return ds


def _map_cases(fn, cases, jobs):
    jobs = max(1, int(jobs if jobs is not None else os.cpu_count() or 1))
    if jobs == 1 or len(cases) <= 1:
        return [fn(c) for c in cases]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cases))


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    rows: list[ScoreReport]
    log: str


def run_test(
    case: CaseManifest,
    fixed: LungPair,
    backend: BackendSpec,
    taus: list[float],
    out_dir: str | os.PathLike | None = None,
) -> CaseResult:
    """Test-time composition for one case.

    Per side: register onto the fixed mask, translate in the fixed frame,
    mask to the fixed side support, deregister. The merged virtual-normal
    image keeps the original pixels outside both lungs. Scores are
    emitted per threshold; artifacts are written when ``out_dir`` is set.
    """
    img, sides = _load_case(case)
    deregistered = {}
    artifacts = {}
    log_lines: list[str] = []
    for side in ("l", "r"):
        pair = reg(sides.side(side), fixed.side(side))
        moving = (img * sides.side(side)).astype(np.uint8)
        fixed_img = warp(moving, pair.forward)
        translated = translate(
            fixed_img, side, backend, side_mask=fixed.side(side), case_id=case.case_id, log=log_lines
        )
        masked = (translated * fixed.side(side)).astype(np.uint8)
        deregistered[side] = warp(masked, pair.inverse)
        artifacts[side] = {"moving": moving, "fixed": fixed_img, "translated": masked}

    lung_l = sides.left.astype(np.int16)
    lung_r = sides.right.astype(np.int16)
    outside = 1 - lung_l - lung_r
    merged = (
        lung_l * deregistered["l"] + lung_r * deregistered["r"] + outside * img.astype(np.int16)
    ).astype(np.uint8)

    case_mask = (sides.left | sides.right).astype(np.uint8)
    v = anomaly_map(img, merged, case_mask, case_mask)

    g = None
    if case.bbox is not None:
        g = bbox_mask(v.shape, case.bbox)
    rows = []
    for tau in taus:
        score = patient_score(v, tau)
        if g is not None:
            z = intersect_bbox(v, g)
            rows.append(ScoreReport(case.case_id, case.label, tau, score, s_intensity(z, tau), s_binary(z, tau)))
        else:
            rows.append(ScoreReport(case.case_id, case.label, tau, score, 0, 0))

    if out_dir is not None:
        case_dir = Path(out_dir) / case.case_id
        for side in ("l", "r"):
            side_dir = case_dir / side
            side_dir.mkdir(parents=True, exist_ok=True)
            for name, image in artifacts[side].items():
                write_pgm(image, side_dir / f"{name}.pgm")
            write_pgm(deregistered[side], side_dir / "deregistered.pgm")
        write_pgm(merged, case_dir / "merged.pgm")
        for tau in taus:
            # display convention: negatives clipped to 0
            display = np.clip(threshold_map(v, tau), 0, 255).astype(np.uint8)
            write_pgm(display, case_dir / f"anomaly_tau{tau:g}.pgm")
    return CaseResult(case.case_id, rows, log="\n".join(log_lines))


def eval_dataset(
    cases: list[CaseManifest],
    fixed_mask: np.ndarray,
    backend: BackendSpec,
    taus: list[float],
    out_dir: str | os.PathLike,
    jobs: int | None = None,
) -> dict:
    """Run the test path over a dataset and write the score report.

    Requires at least one case of each label. Failing cases propagate
    (an evaluation with silently missing cases would be misleading).
    """
    labels = {c.label for c in cases}
    if not {"normal", "abnormal"} <= labels:
        raise InputError("evaluation needs at least one normal and one abnormal case")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fixed = split_mask(as_mask(fixed_mask))

    def work(case: CaseManifest):
        try:
            return run_test(case, fixed, backend, taus, out_dir)
        except CxrError as exc:
            raise _tag_case(exc, case.case_id)

    results = _map_cases(work, cases, jobs)
    rows = [row for res in results for row in res.rows]
    report_path = out_dir / "report.tsv"
    write_report(rows, report_path)
    logs = [res.log for res in results if res.log]
    if logs:
        (out_dir / "run.log").write_text("".join(l + "\n" for l in logs), encoding="utf-8")
    return {"report": report_path, "rows": rows, "summary": summarize(rows)}
