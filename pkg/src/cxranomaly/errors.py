"""Exception taxonomy shared by the whole package.

Every error carries a short machine-readable ``code`` (used by the CLI's
``ERROR <code> <case_id> <message>`` stderr protocol) and an optional
``case_id`` identifying the dataset case that triggered it.
"""

from __future__ import annotations


class CxrError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "GENERIC"

    def __init__(self, message: str, case_id: str | None = None):
        super().__init__(message)
        self.case_id = case_id


class FormatError(CxrError):
    """Malformed file content (PGM header, mask payload, manifest row)."""

    code = "FORMAT"


class UnsupportedDepthError(CxrError):
    """PGM file with a maxval other than 255."""

    code = "UNSUPPORTED_DEPTH"


class ManifestError(CxrError):
    """Invalid dataset manifest (duplicate ids, missing files, bad rows)."""

    code = "MANIFEST"


class SplitError(CxrError):
    """Lung mask cannot be split into two usable components."""

    code = "SPLIT"


class EmptyMaskError(CxrError):
    """Operation requires a non-empty mask support."""

    code = "EMPTY_MASK"


class DegenerateMaskError(CxrError):
    """Mask too small or collapsed (zero chord) for registration."""

    code = "DEGENERATE_MASK"


class OutOfSupportError(CxrError):
    """Queried point lies outside the mask support."""

    code = "OUT_OF_SUPPORT"


class ShapeError(CxrError):
    """Array dimensions do not match the operation's contract."""

    code = "SHAPE"


class SpecError(CxrError):
    """Invalid synthetic-data shape specification."""

    code = "SPEC"


class BackendError(CxrError):
    """External translation backend misbehaved (exit code, dims, timeout)."""

    code = "BACKEND"


class InputError(CxrError):
    """Invalid argument values (empty score lists, bad labels, ...)."""

    code = "INPUT"
