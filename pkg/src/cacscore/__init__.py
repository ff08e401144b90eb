"""Coronary artery calcium quantification toolkit.

Turns CT volumes plus binary calcification masks into lesion-specific
Agatston scores and risk categories, evaluates cohorts against ground truth
(confusion matrices, Cohen's kappa, overlap metrics), and serves an
interactive review loop for human mask refinement.
"""

__version__ = "0.1.0"

from .agatston import (  # noqa: F401
    AgatstonReport,
    RiskCategory,
    ScoringConfig,
    ScoringMode,
    categorize,
    density_weight,
    score_lesion,
    score_patient,
)
from .lesions import Connectivity, CrossSlice, InPlane, Lesion, extract_lesions, label_components  # noqa: F401
from .volume import SliceRecord, Volume, assemble_volume, to_hu  # noqa: F401
