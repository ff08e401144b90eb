"""Segmentation overlap and four-category classification metrics.

Conventions fixed here: confusion matrices are ground truth (rows) by
predicted (cols); Cohen's kappa is unweighted; a both-empty slice pair
scores 1.0 on every overlap metric (correctly predicting an empty mask is
credited, not punished); 0/0 ratios are reported as 0.0 and flagged
undefined so report schemas stay rectangular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .agatston import CATEGORY_ORDER, RiskCategory
from .errors import (
    EmptyInputError,
    InvalidManifestError,
    LengthMismatchError,
    NoAnnotatedSlicesError,
    ShapeMismatchError,
)

N_CATEGORIES = 4


@dataclass(frozen=True)
class SliceOverlap:
    dice: float
    iou: float
    precision: float
    recall: float

    def to_json(self) -> dict:
        return {
            "dice": self.dice,
            "iou": self.iou,
            "precision": self.precision,
            "recall": self.recall,
        }


def slice_overlap(pred: np.ndarray, gt: np.ndarray) -> SliceOverlap:
    """Pixel overlap between one predicted and one ground-truth mask slice."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    p = int(pred.sum())
    g = int(gt.sum())
    inter = int((pred & gt).sum())
    union = p + g - inter
    if p == 0 and g == 0:
        return SliceOverlap(1.0, 1.0, 1.0, 1.0)
    return SliceOverlap(
        dice=2 * inter / (p + g),
        iou=inter / union if union else 0.0,
        precision=inter / p if p else 0.0,
        recall=inter / g if g else 0.0,
    )


@dataclass(frozen=True)
class CohortOverlap:
    mean: SliceOverlap
    n_annotated: int
    empty_slice_specificity: float
    n_empty_gt: int
    undefined: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "mean": self.mean.to_json(),
            "n_annotated": self.n_annotated,
            "empty_slice_specificity": self.empty_slice_specificity,
            "n_empty_gt": self.n_empty_gt,
            "undefined": list(self.undefined),
        }


def cohort_overlap(
    cases: Sequence[tuple[np.ndarray, np.ndarray, bool]],
) -> CohortOverlap:
    """Aggregate slice overlaps across a cohort.

    cases holds (pred_slice, gt_slice, annotated) triples. Means cover
    annotated slices only; empty-slice specificity is the fraction of
    empty-ground-truth slices whose prediction is also empty (the spurious
    activation check).
    """
    if not cases:
        raise NoAnnotatedSlicesError("empty cohort")
    dice, iou, precision, recall = [], [], [], []
    n_empty_gt = 0
    n_empty_correct = 0
    for pred, gt, annotated in cases:
        if annotated:
            overlap = slice_overlap(pred, gt)
            dice.append(overlap.dice)
            iou.append(overlap.iou)
            precision.append(overlap.precision)
            recall.append(overlap.recall)
        if not np.asarray(gt, dtype=bool).any():
            n_empty_gt += 1
            if not np.asarray(pred, dtype=bool).any():
                n_empty_correct += 1
    if not dice:
        raise NoAnnotatedSlicesError("no annotated slices in cohort")
    undefined = ()
    if n_empty_gt:
        specificity = n_empty_correct / n_empty_gt
    else:
        specificity = 0.0
        undefined = ("empty_slice_specificity",)
    # fsum in list order keeps the reduction deterministic across runs
    mean = SliceOverlap(
        dice=math.fsum(dice) / len(dice),
        iou=math.fsum(iou) / len(iou),
        precision=math.fsum(precision) / len(precision),
        recall=math.fsum(recall) / len(recall),
    )
    return CohortOverlap(
        mean=mean,
        n_annotated=len(dice),
        empty_slice_specificity=specificity,
        n_empty_gt=n_empty_gt,
        undefined=undefined,
    )


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """4x4 counts, ground truth rows by predicted cols."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CATEGORIES, N_CATEGORIES):
            raise ValueError(f"expected a 4x4 matrix, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix cells must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def to_json(self) -> dict:
        return {
            "labels": [cat.value for cat in CATEGORY_ORDER],
            "counts": self.counts.tolist(),
            "n": self.n,
        }


def confusion(
    gt: Sequence[RiskCategory], pred: Sequence[RiskCategory]
) -> ConfusionMatrix:
    """Tally (ground truth, predicted) category pairs."""
    if len(gt) != len(pred):
        raise LengthMismatchError(f"{len(gt)} ground-truth vs {len(pred)} predicted labels")
    if not gt:
        raise EmptyInputError("cannot build a confusion matrix from zero pairs")
    index = {cat: k for k, cat in enumerate(CATEGORY_ORDER)}
    counts = np.zeros((N_CATEGORIES, N_CATEGORIES), dtype=np.int64)
    for g, p in zip(gt, pred):
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class CategoryMetrics:
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    f1: float
    undefined: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "ppv": self.ppv,
            "npv": self.npv,
            "f1": self.f1,
            "undefined": list(self.undefined),
        }


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def per_category(cm: ConfusionMatrix, k: int) -> CategoryMetrics:
    """One-vs-rest metrics for category index k."""
    if not 0 <= k < N_CATEGORIES:
        raise ValueError(f"category index {k} out of range")
    counts = cm.counts
    n = cm.n
    tp = int(counts[k, k])
    fn = int(counts[k].sum()) - tp
    fp = int(counts[:, k].sum()) - tp
    tn = n - tp - fn - fp
    undefined: list[str] = []
    sens = _ratio(tp, tp + fn, "sensitivity", undefined)
    spec = _ratio(tn, tn + fp, "specificity", undefined)
    ppv = _ratio(tp, tp + fp, "ppv", undefined)
    npv = _ratio(tn, tn + fn, "npv", undefined)
    if ppv + sens > 0:
        f1 = 2 * ppv * sens / (ppv + sens)
    else:
        undefined.append("f1")
        f1 = 0.0
    return CategoryMetrics(
        sensitivity=sens,
        specificity=spec,
        ppv=ppv,
        npv=npv,
        f1=f1,
        undefined=tuple(undefined),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.n == 0:
        raise EmptyInputError("accuracy of an empty matrix")
    return float(np.trace(cm.counts)) / cm.n


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """Unweighted chance-corrected agreement.

    p_e = sum_k row_k * col_k / n^2. The degenerate single-category case
    (p_e == 1) returns 1 when observed agreement is also perfect, else 0.
    """
    if cm.n == 0:
        raise EmptyInputError("kappa of an empty matrix")
    n = cm.n
    p_o = float(np.trace(cm.counts)) / n
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    p_e = float(rows @ cols) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


# --- confusion-matrix fixture format (textual grid + label header) ---

def format_confusion_fixture(cm: ConfusionMatrix) -> str:
    lines = ["labels: " + " ".join(cat.value for cat in CATEGORY_ORDER)]
    for row in cm.counts:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_confusion_fixture(text: str) -> ConfusionMatrix:
    lines = [
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines or not lines[0].startswith("labels:"):
        raise InvalidManifestError("confusion fixture must start with a 'labels:' header")
    labels = lines[0].split(":", 1)[1].split()
    if labels != [cat.value for cat in CATEGORY_ORDER]:
        raise InvalidManifestError(f"unexpected category labels {labels}")
    if len(lines) != 1 + N_CATEGORIES:
        raise InvalidManifestError(
            f"expected {N_CATEGORIES} count rows, found {len(lines) - 1}"
        )
    try:
        counts = [[int(v) for v in line.split()] for line in lines[1:]]
    except ValueError as exc:
        raise InvalidManifestError(f"non-integer cell: {exc}") from exc
    if any(len(row) != N_CATEGORIES for row in counts):
        raise InvalidManifestError("every fixture row needs exactly 4 cells")
    return ConfusionMatrix(np.array(counts, dtype=np.int64))
