"""Dataset case manifests.

A manifest is UTF-8 text, one case per line:

    case_id<TAB>image_path<TAB>mask_path<TAB>label[<TAB>rmin,cmin,rmax,cmax]

Lines starting with ``#`` (and blank lines) are ignored. ``label`` is
``normal`` or ``abnormal``; the optional bounding box (inclusive pixel
bounds) is only allowed on abnormal cases. Relative paths are resolved
against the manifest's own directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

LABELS = ("normal", "abnormal")


@dataclass(frozen=True)
class CaseManifest:
    case_id: str
    image_path: Path
    mask_path: Path
    label: str
    bbox: tuple[int, int, int, int] | None = None

    @property
    def abnormal(self) -> bool:
        return self.label == "abnormal"


def _parse_bbox(field: str, case_id: str) -> tuple[int, int, int, int]:
    parts = field.split(",")
    if len(parts) != 4:
        raise ManifestError(f"bbox needs 4 comma-separated integers, got {field!r}", case_id)
    try:
        rmin, cmin, rmax, cmax = (int(p) for p in parts)
    except ValueError:
        raise ManifestError(f"non-integer bbox field {field!r}", case_id) from None
    if min(rmin, cmin, rmax, cmax) < 0 or rmin > rmax or cmin > cmax:
        raise ManifestError(f"inverted or negative bbox {field!r}", case_id)
    return rmin, cmin, rmax, cmax


def load_manifest(path: str | os.PathLike) -> list[CaseManifest]:
    """Parse a manifest file, validating labels, paths, and id uniqueness."""
    path = Path(path)
    base = path.parent
    cases: list[CaseManifest] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) not in (4, 5):
            raise ManifestError(f"line {lineno}: expected 4 or 5 tab-separated fields")
        case_id, image_field, mask_field, label = fields[:4]
        if not case_id:
            raise ManifestError(f"line {lineno}: empty case id")
        if case_id in seen:
            raise ManifestError(f"duplicate case id {case_id!r}", case_id)
        if label not in LABELS:
            raise ManifestError(f"unknown label {label!r}", case_id)
        bbox = None
        if len(fields) == 5 and fields[4]:
            if label != "abnormal":
                raise ManifestError("bbox given for a non-abnormal case", case_id)
            bbox = _parse_bbox(fields[4], case_id)
        image_path = (base / image_field).resolve()
        mask_path = (base / mask_field).resolve()
        for p in (image_path, mask_path):
            if not p.is_file():
                raise ManifestError(f"referenced file does not exist: {p}", case_id)
        seen.add(case_id)
        cases.append(CaseManifest(case_id, image_path, mask_path, label, bbox))
    return cases


def save_manifest(cases: list[CaseManifest], path: str | os.PathLike) -> None:
    """Write cases back out, paths relative to the manifest directory."""
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for c in cases:
        fields = [
            c.case_id,
            os.path.relpath(c.image_path, base),
            os.path.relpath(c.mask_path, base),
            c.label,
        ]
        if c.bbox is not None:
            fields.append(",".join(str(v) for v in c.bbox))
        lines.append("\t".join(fields))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
