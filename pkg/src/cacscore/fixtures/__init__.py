"""Shipped evaluation fixtures: published confusion matrices and the metric
values reported alongside them, so table reproduction runs fully offline."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..errors import InvalidManifestError, MissingFixtureError
from ..metrics import ConfusionMatrix, parse_confusion_fixture

COHORTS = (
    "heartlens_gated",
    "stanford_gated",
    "stanford_nongated_cardvit",
    "stanford_nongated_aicac",
)

_REPORTED_FILES = ("gated_reported.txt", "nongated_reported.txt")

CATEGORY_LABELS = ("0-10", "11-100", "101-400", "400+")
METRIC_NAMES = ("sensitivity", "specificity", "ppv", "npv", "f1")


@dataclass(frozen=True)
class ReportedMetrics:
    """Published values for one cohort: overall accuracy/kappa and the five
    per-category metrics keyed by category label."""

    accuracy: float
    kappa: float
    per_category: dict[str, dict[str, float]]


def _read_fixture(name: str) -> str:
    ref = resources.files(__package__).joinpath("tables", name)
    try:
        return ref.read_text()
    except FileNotFoundError as exc:
        raise MissingFixtureError(f"fixture {name} not shipped") from exc


def load_confusion(cohort: str) -> ConfusionMatrix:
    if cohort not in COHORTS:
        raise MissingFixtureError(f"unknown cohort {cohort!r}; have {COHORTS}")
    return parse_confusion_fixture(_read_fixture(f"{cohort}.cm"))


def load_reported() -> dict[str, ReportedMetrics]:
    """Parse both reported-metrics tables into one cohort-keyed map."""
    out: dict[str, ReportedMetrics] = {}
    for fname in _REPORTED_FILES:
        current: str | None = None
        overall: tuple[float, float] | None = None
        cats: dict[str, dict[str, float]] = {}

        def flush():
            if current is None:
                return
            if overall is None or set(cats) != set(CATEGORY_LABELS):
                raise InvalidManifestError(f"incomplete reported block for {current}")
            out[current] = ReportedMetrics(
                accuracy=overall[0], kappa=overall[1], per_category=dict(cats)
            )

        for line in _read_fixture(fname).splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "cohort":
                flush()
                current, overall, cats = parts[1], None, {}
            elif parts[0] == "overall":
                overall = (float(parts[1]), float(parts[2]))
            else:
                if len(parts) != 6 or parts[0] not in CATEGORY_LABELS:
                    raise InvalidManifestError(f"bad reported line {line!r}")
                cats[parts[0]] = dict(zip(METRIC_NAMES, (float(v) for v in parts[1:])))
        flush()
    missing = set(COHORTS) - set(out)
    if missing:
        raise MissingFixtureError(f"reported metrics missing for {sorted(missing)}")
    return out
