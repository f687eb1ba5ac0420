"""Lung-mask driven registration, bilateral augmentation, and anomaly
scoring for chest radiographs.

The core is transform-shaped: a registration learned from a (moving,
fixed) mask pair that warps images into a shared reference frame and
back. ``MaskRegistration`` exposes it with the scikit-learn estimator
protocol; the functional API (``reg``/``warp``) and the pipeline stages
are importable from the submodules.
"""

from .augment import ba_l_to_r, ba_r_to_l
from .errors import (
    BackendError,
    CxrError,
    DegenerateMaskError,
    EmptyMaskError,
    FormatError,
    InputError,
    ManifestError,
    OutOfSupportError,
    ShapeError,
    SpecError,
    SplitError,
    UnsupportedDepthError,
)
from .lungmask import LungAnchors, LungPair, anchors, boundary, split_mask
from .manifest import CaseManifest, load_manifest, save_manifest
from .metrics import (
    ScoreReport,
    anomaly_map,
    auc,
    intersect_bbox,
    patient_score,
    s_binary,
    s_intensity,
    threshold_map,
)
from .pgm import read_mask, read_pgm, write_mask, write_pgm
from .pipeline import BackendSpec, PreparedDataset, eval_dataset, prepare, run_test, translate
from .registration import (
    CoordMap,
    MaskRegistration,
    RegPair,
    evaluate_meta,
    export_pseudo_pairs,
    read_coord_map,
    reg,
    warp,
    warp_mask,
    write_coord_map,
)
from .relcoords import OracleMap, RelCoord, oracle_register, rel_coord
from .synthetic import BlobSpec, CaseSpec, LesionSpec, SyntheticSpec, blob_mask, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BackendSpec",
    "BlobSpec",
    "CaseManifest",
    "CaseSpec",
    "CoordMap",
    "CxrError",
    "DegenerateMaskError",
    "EmptyMaskError",
    "FormatError",
    "InputError",
    "LesionSpec",
    "LungAnchors",
    "LungPair",
    "ManifestError",
    "MaskRegistration",
    "OracleMap",
    "OutOfSupportError",
    "PreparedDataset",
    "RegPair",
    "RelCoord",
    "ScoreReport",
    "ShapeError",
    "SpecError",
    "SplitError",
    "SyntheticSpec",
    "UnsupportedDepthError",
    "anchors",
    "anomaly_map",
    "auc",
    "ba_l_to_r",
    "ba_r_to_l",
    "blob_mask",
    "boundary",
    "eval_dataset",
    "evaluate_meta",
    "export_pseudo_pairs",
    "gen_synthetic",
    "intersect_bbox",
    "load_manifest",
    "oracle_register",
    "patient_score",
    "prepare",
    "read_coord_map",
    "read_mask",
    "read_pgm",
    "reg",
    "rel_coord",
    "run_test",
    "s_binary",
    "s_intensity",
    "save_manifest",
    "split_mask",
    "threshold_map",
    "translate",
    "warp",
    "warp_mask",
    "write_coord_map",
    "write_mask",
    "write_pgm",
]
