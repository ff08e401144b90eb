"""HU volume model: slice records, rescale arithmetic, and volume assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicatePositionError, InconsistentGeometryError

HU_MIN = -32768
HU_MAX = 32767

# Reference slice thickness of the classical scoring protocol; used both as the
# default for slices that omit the tag and as the normalization denominator.
REFERENCE_THICKNESS_MM = 3.0

SPACING_REL_TOL = 1e-4


class IngestWarning(UserWarning):
    """Emitted when a missing tag is replaced by a documented default."""


@dataclass(frozen=True, eq=False)
class SliceRecord:
    """One parsed CT slice, prior to volume assembly.

    raw_pixels holds the stored (pre-rescale) values as a signed 16-bit
    (rows, cols) grid.
    """

    rows: int
    cols: int
    pixel_spacing_mm: tuple[float, float]  # (row_mm, col_mm)
    slice_thickness_mm: float
    rescale_slope: float
    rescale_intercept: float
    z_position_mm: float
    instance_number: int
    raw_pixels: np.ndarray

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError(f"non-positive slice shape {self.rows}x{self.cols}")
        if self.pixel_spacing_mm[0] <= 0 or self.pixel_spacing_mm[1] <= 0:
            raise ValueError(f"non-positive pixel spacing {self.pixel_spacing_mm}")
        if self.raw_pixels.size != self.rows * self.cols:
            raise ValueError(
                f"pixel buffer has {self.raw_pixels.size} values, "
                f"expected {self.rows * self.cols}"
            )
        pixels = np.asarray(self.raw_pixels, dtype=np.int16).reshape(self.rows, self.cols)
        pixels.setflags(write=False)
        object.__setattr__(self, "raw_pixels", pixels)

    def __eq__(self, other):
        if not isinstance(other, SliceRecord):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.pixel_spacing_mm == other.pixel_spacing_mm
            and self.slice_thickness_mm == other.slice_thickness_mm
            and self.rescale_slope == other.rescale_slope
            and self.rescale_intercept == other.rescale_intercept
            and self.z_position_mm == other.z_position_mm
            and self.instance_number == other.instance_number
            and np.array_equal(self.raw_pixels, other.raw_pixels)
        )


@dataclass(frozen=True, eq=False)
class Volume:
    """Immutable HU volume with physical spacing.

    spacing_mm is (slice_thickness, row_mm, col_mm); hu is an int16 array of
    shape (n_slices, rows, cols); slice_order lists the source instance
    numbers in output (z-ascending) order.
    """

    hu: np.ndarray
    spacing_mm: tuple[float, float, float]
    slice_order: tuple[int, ...] = field(default=())

    def __post_init__(self):
        hu = np.asarray(self.hu, dtype=np.int16)
        if hu.ndim != 3:
            raise ValueError(f"volume must be 3-dimensional, got shape {hu.shape}")
        if any(s <= 0 for s in self.spacing_mm):
            raise ValueError(f"non-positive spacing {self.spacing_mm}")
        hu.setflags(write=False)
        object.__setattr__(self, "hu", hu)
        if not self.slice_order:
            object.__setattr__(self, "slice_order", tuple(range(hu.shape[0])))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.hu.shape

    @property
    def pixel_area_mm2(self) -> float:
        return self.spacing_mm[1] * self.spacing_mm[2]


def to_hu(raw: float, slope: float, intercept: float) -> int:
    """Apply the CT rescale (slope * raw + intercept), rounded to the nearest
    integer and saturated at the signed 16-bit bounds."""
    value = int(np.rint(slope * raw + intercept))
    return max(HU_MIN, min(HU_MAX, value))


def rescale_to_hu(raw: np.ndarray, slope: float, intercept: float) -> np.ndarray:
    """Vectorized to_hu over a raw pixel array; returns int16."""
    values = np.rint(slope * raw.astype(np.float64) + intercept)
    return np.clip(values, HU_MIN, HU_MAX).astype(np.int16)


def _spacing_close(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return all(
        math.isclose(x, y, rel_tol=SPACING_REL_TOL, abs_tol=0.0) for x, y in zip(a, b)
    )


def assemble_volume(slices: list[SliceRecord]) -> Volume:
    """Order parsed slices into a Volume.

    Slices sort by ascending z position with instance number as the
    tiebreak. Slice thickness is taken as the median inter-slice z gap when
    two or more slices are present, else the single record's own thickness.

    Raises InconsistentGeometryError on shape/spacing mismatch and
    DuplicatePositionError when two slices share both z and instance number.
    """
    if not slices:
        raise ValueError("cannot assemble a volume from zero slices")

    first = slices[0]
    for rec in slices[1:]:
        if rec.rows != first.rows or rec.cols != first.cols:
            raise InconsistentGeometryError(
                f"slice shape {rec.rows}x{rec.cols} != {first.rows}x{first.cols}"
            )
        if not _spacing_close(rec.pixel_spacing_mm, first.pixel_spacing_mm):
            raise InconsistentGeometryError(
                f"pixel spacing {rec.pixel_spacing_mm} != {first.pixel_spacing_mm}"
            )

    ordered = sorted(slices, key=lambda r: (r.z_position_mm, r.instance_number))
    for a, b in zip(ordered, ordered[1:]):
        if a.z_position_mm == b.z_position_mm and a.instance_number == b.instance_number:
            raise DuplicatePositionError(
                f"two slices at z={a.z_position_mm} with instance {a.instance_number}"
            )

    if len(ordered) >= 2:
        gaps = np.diff([r.z_position_mm for r in ordered])
        thickness = float(np.median(gaps))
        if thickness <= 0.0:  # degenerate equal-z stack
            thickness = ordered[0].slice_thickness_mm
    else:
        thickness = ordered[0].slice_thickness_mm

    hu = np.stack(
        [rescale_to_hu(r.raw_pixels, r.rescale_slope, r.rescale_intercept) for r in ordered]
    )
    return Volume(
        hu=hu,
        spacing_mm=(thickness, first.pixel_spacing_mm[0], first.pixel_spacing_mm[1]),
        slice_order=tuple(r.instance_number for r in ordered),
    )
