"""Exception types shared across the package."""


class CacError(Exception):
    """Base class for all package-specific errors."""


# --- CT ingestion ---

class UnsupportedTransferSyntaxError(CacError):
    """DICOM stream uses a compressed or otherwise unsupported transfer syntax."""


class MissingRequiredTagError(CacError):
    """A tag required to build a slice (rows, cols, pixel spacing, pixel data) is absent."""


class MalformedElementError(CacError):
    """A data element's declared length overruns the buffer or its header is truncated."""


class InconsistentGeometryError(CacError):
    """Slices disagree on shape or pixel spacing."""


class DuplicatePositionError(CacError):
    """Two slices share both z position and instance number."""


class LengthMismatchError(CacError):
    """Payload length disagrees with the manifest's declared shape."""


class InvalidManifestError(CacError):
    """Manifest text is malformed or declares unsupported options."""


# --- masks and lesions ---

class ShapeMismatchError(CacError):
    """Mask and volume (or pred and gt) shapes differ."""


class RoiOutOfBoundsError(CacError):
    """Requested ROI box exceeds the volume extent."""


class UnknownComponentError(CacError):
    """Referenced component id does not exist in the mask."""


class VoxelOutOfBoundsError(CacError):
    """A voxel coordinate lies outside the mask extent."""


# --- scoring ---

class LesionVolumeMismatchError(CacError):
    """Lesion voxels do not fit inside the volume they are scored against."""


class NegativeScoreError(CacError):
    """A risk category was requested for a negative score."""


# --- evaluation ---

class NoAnnotatedSlicesError(CacError):
    """Cohort overlap requested but no slice carries the annotated flag."""


class EmptyInputError(CacError):
    """Metric derivation requested from an empty sample."""


# --- CLI / fixtures ---

class NoGroundTruthError(CacError):
    """Cohort evaluation requires at least one study with ground truth."""


class MissingFixtureError(CacError):
    """A shipped fixture file could not be found."""


# --- mask provider ---

class ProviderError(CacError):
    """External mask provider failed or returned a contract-violating response."""
