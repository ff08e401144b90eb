"""Agatston scoring: density weights, lesion and patient scores, risk bins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LesionVolumeMismatchError, NegativeScoreError, ShapeMismatchError
from .lesions import Connectivity, CrossSlice, InPlane, Lesion, extract_lesions
from .volume import REFERENCE_THICKNESS_MM, Volume

DEFAULT_HU_THRESHOLD = 130.0
DEFAULT_MIN_COMPONENT_AREA_MM2 = 1.0


class RiskCategory(Enum):
    """Four-bin risk stratification of the total score."""

    CAT_0_10 = "0-10"
    CAT_11_100 = "11-100"
    CAT_101_400 = "101-400"
    CAT_400_PLUS = "400+"


CATEGORY_ORDER = (
    RiskCategory.CAT_0_10,
    RiskCategory.CAT_11_100,
    RiskCategory.CAT_101_400,
    RiskCategory.CAT_400_PLUS,
)


def categorize(score: float) -> RiskCategory:
    """Map a total score to its risk bin.

    Bins are closed on the right at 10/100/400 so every integer-labeled
    boundary score lands in its named bin; fractional scores just above a
    boundary move up.
    """
    if score < 0 or math.isnan(score):
        raise NegativeScoreError(f"cannot categorize score {score}")
    if score <= 10:
        return RiskCategory.CAT_0_10
    if score <= 100:
        return RiskCategory.CAT_11_100
    if score <= 400:
        return RiskCategory.CAT_101_400
    return RiskCategory.CAT_400_PLUS


def density_weight(peak_hu: float) -> int:
    """Classical density step: <130 -> 0, 130-199 -> 1, 200-299 -> 2,
    300-399 -> 3, >=400 -> 4."""
    if peak_hu < 130:
        return 0
    if peak_hu < 200:
        return 1
    if peak_hu < 300:
        return 2
    if peak_hu < 400:
        return 3
    return 4


class ScoringMode(Enum):
    LESION_SPECIFIC = "lesion_specific"
    CLASSIC_SLICEWISE = "classic_slicewise"


@dataclass(frozen=True)
class ScoringConfig:
    mode: ScoringMode = ScoringMode.LESION_SPECIFIC
    hu_threshold: float = DEFAULT_HU_THRESHOLD
    min_component_area_mm2: float = DEFAULT_MIN_COMPONENT_AREA_MM2
    thickness_normalization: bool = False
    connectivity: Connectivity = Connectivity()

    def __post_init__(self):
        if self.hu_threshold < 0:
            raise ValueError(f"hu_threshold must be >= 0, got {self.hu_threshold}")
        if self.min_component_area_mm2 < 0:
            raise ValueError(
                f"min_component_area_mm2 must be >= 0, got {self.min_component_area_mm2}"
            )

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "hu_threshold": self.hu_threshold,
            "min_component_area_mm2": self.min_component_area_mm2,
            "thickness_normalization": self.thickness_normalization,
            "connectivity": {
                "in_plane": self.connectivity.in_plane.value,
                "cross_slice": self.connectivity.cross_slice.value,
            },
        }

    @staticmethod
    def from_json(doc: dict) -> "ScoringConfig":
        conn = doc.get("connectivity", {})
        return ScoringConfig(
            mode=ScoringMode(doc.get("mode", "lesion_specific")),
            hu_threshold=float(doc.get("hu_threshold", DEFAULT_HU_THRESHOLD)),
            min_component_area_mm2=float(
                doc.get("min_component_area_mm2", DEFAULT_MIN_COMPONENT_AREA_MM2)
            ),
            thickness_normalization=bool(doc.get("thickness_normalization", False)),
            connectivity=Connectivity(
                InPlane(conn.get("in_plane", "eight")),
                CrossSlice(conn.get("cross_slice", "full")),
            ),
        )


def score_lesion(lesion: Lesion, volume: Volume, cfg: ScoringConfig) -> float:
    """Score one lesion.

    lesion_specific weights the lesion's whole area by its 3D peak HU;
    classic_slicewise weights each slice's area by that slice's own peak.
    With thickness_normalization every slice term scales by
    slice_thickness / 3.0. A lesion whose peak falls below cfg.hu_threshold
    scores 0 in either mode.
    """
    (s0, s1), (r0, r1), (c0, c1) = lesion.bounding_box
    n, rows, cols = volume.shape
    if not (0 <= s0 <= s1 < n and 0 <= r0 <= r1 < rows and 0 <= c0 <= c1 < cols):
        raise LesionVolumeMismatchError(
            f"lesion {lesion.id} bounding box {lesion.bounding_box} exceeds "
            f"volume shape {volume.shape}"
        )
    if lesion.max_hu < cfg.hu_threshold:
        return 0.0
    factor = volume.spacing_mm[0] / REFERENCE_THICKNESS_MM if cfg.thickness_normalization else 1.0
    if cfg.mode is ScoringMode.LESION_SPECIFIC:
        weight = density_weight(lesion.max_hu)
        return weight * sum(lesion.per_slice_area_mm2.values()) * factor
    slice_peaks = lesion.slice_max_hu(volume)
    return sum(
        density_weight(slice_peaks[s]) * area * factor
        for s, area in lesion.per_slice_area_mm2.items()
    )


@dataclass(frozen=True)
class LesionScore:
    lesion_id: int
    score: float
    max_hu: int
    total_area_mm2: float
    slice_span: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "lesion_id": self.lesion_id,
            "score": self.score,
            "max_hu": self.max_hu,
            "total_area_mm2": self.total_area_mm2,
            "slice_span": list(self.slice_span),
        }


@dataclass(frozen=True)
class AgatstonReport:
    per_lesion: tuple[LesionScore, ...]
    total_score: float
    category: RiskCategory
    config: ScoringConfig = field(default_factory=ScoringConfig)

    def to_json(self) -> dict:
        return {
            "total_score": self.total_score,
            "category": self.category.value,
            "lesion_count": len(self.per_lesion),
            "per_lesion": [entry.to_json() for entry in self.per_lesion],
            "config": self.config.to_json(),
        }


def score_patient(volume: Volume, mask: np.ndarray, cfg: ScoringConfig | None = None) -> AgatstonReport:
    """Extract lesions from the mask and sum their scores into the patient
    total, with the risk category and config echo attached."""
    if cfg is None:
        cfg = ScoringConfig()
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != volume.shape:
        raise ShapeMismatchError(f"mask shape {mask.shape} != volume shape {volume.shape}")
    lesions = extract_lesions(volume, mask, cfg.connectivity, cfg.min_component_area_mm2)
    entries = tuple(
        LesionScore(
            lesion_id=lesion.id,
            score=score_lesion(lesion, volume, cfg),
            max_hu=lesion.max_hu,
            total_area_mm2=lesion.total_area_mm2,
            slice_span=lesion.slice_span,
        )
        for lesion in lesions
    )
    total = math.fsum(entry.score for entry in entries)
    return AgatstonReport(
        per_lesion=entries,
        total_score=total,
        category=categorize(total),
        config=cfg,
    )
