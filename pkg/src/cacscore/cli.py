"""Batch command-line front end.

Verbs: score (one study), evaluate (a cohort against ground truth), tables
(reproduce the shipped published-matrix metrics offline), segment (threshold
baseline mask), mask-convert (packed bits <-> plain-text PGM).

Exit codes partition outcomes: 0 success, 2 input error, 3 provider error,
4 internal invariant violation. Reports are emitted as canonical JSON
(fixed field order, shortest round-trip floats), with CSV as a flat
projection where the data is rectangular.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agatston import (
    CATEGORY_ORDER,
    RiskCategory,
    ScoringConfig,
    categorize,
    score_patient,
)
from .dicomio import load_dicom_dir
from .errors import (
    CacError,
    InvalidManifestError,
    NoGroundTruthError,
    ProviderError,
)
from .fixtures import COHORTS, load_confusion, load_reported
from .mask import (
    mask_to_pgm_slices,
    pgm_slices_to_mask,
    read_mask,
    threshold_segment,
    write_mask,
)
from .metrics import accuracy, cohen_kappa, cohort_overlap, confusion, per_category
from .provider import provider_from_env
from .rawio import read_raw_volume
from .volume import Volume

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_PROVIDER_ERROR = 3
EXIT_INTERNAL_ERROR = 4

METRIC_NAMES = ("sensitivity", "specificity", "ppv", "npv", "f1")


def emit_json(doc: dict, path: Path | None = None) -> str:
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        path.write_text(text)
    return text


# --- study manifests ---

def load_study_manifest(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise InvalidManifestError(f"study manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidManifestError(f"{path}: expected a JSON object")
    doc.setdefault("study_id", path.stem)
    doc["_base_dir"] = str(path.parent)
    return doc


def _resolve(base_dir: str, relpath: str) -> Path:
    p = Path(relpath)
    return p if p.is_absolute() else Path(base_dir) / p


def load_study_volume(study: dict) -> Volume:
    spec = study.get("input")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidManifestError(f"study {study.get('study_id')}: missing input.kind")
    base = study.get("_base_dir", ".")
    kind = spec["kind"]
    if kind == "raw_fixture":
        try:
            return read_raw_volume(
                _resolve(base, spec["manifest"]), _resolve(base, spec["payload"])
            )
        except FileNotFoundError as exc:
            raise InvalidManifestError(f"volume fixture missing: {exc}") from exc
        except KeyError as exc:
            raise InvalidManifestError(f"raw_fixture input needs {exc} path") from exc
    if kind == "dicom_dir":
        try:
            return load_dicom_dir(_resolve(base, spec["path"]))
        except FileNotFoundError as exc:
            raise InvalidManifestError(f"dicom dir missing: {exc}") from exc
        except KeyError as exc:
            raise InvalidManifestError(f"dicom_dir input needs {exc}") from exc
    raise InvalidManifestError(f"unknown input kind {kind!r}")


def load_study_mask(study: dict, volume: Volume, cfg: ScoringConfig) -> np.ndarray:
    spec = study.get("mask")
    if not isinstance(spec, dict) or "source" not in spec:
        raise InvalidManifestError(f"study {study.get('study_id')}: missing mask.source")
    base = study.get("_base_dir", ".")
    source = spec["source"]
    if source == "file":
        try:
            return read_mask(_resolve(base, spec["manifest"]), _resolve(base, spec["payload"]))
        except FileNotFoundError as exc:
            raise InvalidManifestError(f"mask file missing: {exc}") from exc
        except KeyError as exc:
            raise InvalidManifestError(f"file mask needs {exc} path") from exc
    if source == "threshold":
        roi = spec.get("roi")
        if roi is not None:
            roi = tuple((int(lo), int(hi)) for lo, hi in roi)
        return threshold_segment(volume, float(spec.get("hu_threshold", cfg.hu_threshold)), roi)
    if source == "provider":
        client = provider_from_env(
            spec.get("endpoint"),
            timeout_s=float(spec.get("timeout_s", 30.0)),
            retries=int(spec.get("retries", 2)),
        )
        slice_range = spec.get("slice_range")
        if slice_range is not None:
            slice_range = (int(slice_range[0]), int(slice_range[1]))
        return client.fetch_mask(volume, slice_range)
    raise InvalidManifestError(f"unknown mask source {source!r}")


def scoring_config(args, study: dict | None = None) -> ScoringConfig:
    """Merge config file, study overrides, and explicit flags (flags win)."""
    doc: dict = {}
    if getattr(args, "config", None):
        try:
            doc.update(json.loads(Path(args.config).read_text()))
        except FileNotFoundError as exc:
            raise InvalidManifestError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidManifestError(f"bad config document: {exc}") from exc
    if study and isinstance(study.get("scoring"), dict):
        doc.update(study["scoring"])
    if getattr(args, "mode", None):
        doc["mode"] = args.mode
    if getattr(args, "hu_threshold", None) is not None:
        doc["hu_threshold"] = args.hu_threshold
    if getattr(args, "min_component_area_mm2", None) is not None:
        doc["min_component_area_mm2"] = args.min_component_area_mm2
    if getattr(args, "thickness_normalization", False):
        doc["thickness_normalization"] = True
    conn = dict(doc.get("connectivity", {}))
    if getattr(args, "in_plane", None):
        conn["in_plane"] = args.in_plane
    if getattr(args, "cross_slice", None):
        conn["cross_slice"] = args.cross_slice
    if conn:
        doc["connectivity"] = conn
    try:
        return ScoringConfig.from_json(doc)
    except (ValueError, KeyError) as exc:
        raise InvalidManifestError(f"bad scoring config: {exc}") from exc


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="scoring config document (JSON)")
    parser.add_argument("--mode", choices=["lesion_specific", "classic_slicewise"])
    parser.add_argument("--hu-threshold", type=float, dest="hu_threshold")
    parser.add_argument(
        "--min-component-area-mm2", type=float, dest="min_component_area_mm2"
    )
    parser.add_argument(
        "--thickness-normalization", action="store_true", dest="thickness_normalization"
    )
    parser.add_argument("--in-plane", choices=["four", "eight"], dest="in_plane")
    parser.add_argument("--cross-slice", choices=["none", "face", "full"], dest="cross_slice")


# --- score ---

def _score_table(study_id: str, report) -> str:
    lines = [
        f"study: {study_id}",
        f"total score: {report.total_score:.1f}   category: {report.category.value}",
        f"{'lesion':>6} {'score':>10} {'max HU':>7} {'area mm2':>9} {'slices':>9}",
    ]
    for entry in sorted(report.per_lesion, key=lambda e: -e.score):
        span = f"{entry.slice_span[0]}-{entry.slice_span[1]}"
        lines.append(
            f"{entry.lesion_id:>6} {entry.score:>10.1f} {entry.max_hu:>7} "
            f"{entry.total_area_mm2:>9.2f} {span:>9}"
        )
    return "\n".join(lines)


def run_score(args) -> int:
    study = load_study_manifest(Path(args.study))
    cfg = scoring_config(args, study)
    volume = load_study_volume(study)
    mask = load_study_mask(study, volume, cfg)
    report = score_patient(volume, mask, cfg)
    doc = {"study_id": study["study_id"], "tool_version": __version__}
    doc.update(report.to_json())
    print(_score_table(study["study_id"], report))
    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    text = emit_json(doc, out_dir / f"{study['study_id']}.report.json" if out_dir else None)
    print(text, end="")
    return EXIT_OK


# --- evaluate ---

def _gt_category(study: dict) -> RiskCategory | None:
    gt = study.get("ground_truth")
    if not isinstance(gt, dict):
        return None
    if "category" in gt:
        try:
            return RiskCategory(gt["category"])
        except ValueError as exc:
            raise InvalidManifestError(f"unknown ground-truth category {gt['category']!r}") from exc
    if "score" in gt:
        return categorize(float(gt["score"]))
    return None


def run_evaluate(args) -> int:
    cohort_path = Path(args.cohort)
    try:
        cohort = json.loads(cohort_path.read_text())
    except FileNotFoundError as exc:
        raise InvalidManifestError(f"cohort manifest not found: {cohort_path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidManifestError(f"{cohort_path}: not valid JSON: {exc}") from exc
    entries = cohort.get("studies")
    if not isinstance(entries, list) or not entries:
        raise InvalidManifestError("cohort manifest needs a non-empty 'studies' list")

    studies = []
    for entry in entries:
        if isinstance(entry, str):
            studies.append(load_study_manifest(_resolve(str(cohort_path.parent), entry)))
        elif isinstance(entry, dict):
            entry = dict(entry)
            entry.setdefault("study_id", f"study-{len(studies)}")
            entry.setdefault("_base_dir", str(cohort_path.parent))
            studies.append(entry)
        else:
            raise InvalidManifestError("cohort entries must be paths or objects")

    cfg = scoring_config(args)
    rows = []
    gt_cats: list[RiskCategory] = []
    pred_cats: list[RiskCategory] = []
    overlap_cases = []
    for study in studies:
        volume = load_study_volume(study)
        study_cfg = scoring_config(args, study)
        mask = load_study_mask(study, volume, study_cfg)
        report = score_patient(volume, mask, study_cfg)
        gt_cat = _gt_category(study)
        rows.append(
            {
                "study_id": study["study_id"],
                "total_score": report.total_score,
                "category": report.category.value,
                "gt_category": gt_cat.value if gt_cat else None,
                "match": (gt_cat == report.category) if gt_cat else None,
            }
        )
        if gt_cat is not None:
            gt_cats.append(gt_cat)
            pred_cats.append(report.category)
        gt_mask_spec = (study.get("ground_truth") or {}).get("mask")
        if isinstance(gt_mask_spec, dict):
            base = study.get("_base_dir", ".")
            gt_mask = read_mask(
                _resolve(base, gt_mask_spec["manifest"]),
                _resolve(base, gt_mask_spec["payload"]),
            )
            if gt_mask.shape != volume.shape:
                raise InvalidManifestError(
                    f"study {study['study_id']}: ground-truth mask shape "
                    f"{gt_mask.shape} != volume shape {volume.shape}"
                )
            for k in range(volume.shape[0]):
                overlap_cases.append((mask[k], gt_mask[k], bool(gt_mask[k].any())))

    if not gt_cats:
        raise NoGroundTruthError("no study in the cohort carries ground truth")

    cm = confusion(gt_cats, pred_cats)
    doc = {
        "tool_version": __version__,
        "n_studies": len(studies),
        "n_with_ground_truth": len(gt_cats),
        "accuracy": accuracy(cm),
        "kappa": cohen_kappa(cm),
        "confusion": cm.to_json(),
        "per_category": {
            cat.value: per_category(cm, k).to_json()
            for k, cat in enumerate(CATEGORY_ORDER)
        },
        "overlap": cohort_overlap(overlap_cases).to_json() if overlap_cases else None,
        "studies": rows,
        "config": cfg.to_json(),
    }

    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_lines = ["study_id,total_score,category,gt_category,match"]
        for row in rows:
            csv_lines.append(
                f"{row['study_id']},{row['total_score']!r},{row['category']},"
                f"{row['gt_category'] or ''},{'' if row['match'] is None else row['match']}"
            )
        (out_dir / "cohort.csv").write_text("\n".join(csv_lines) + "\n")
    text = emit_json(doc, out_dir / "cohort.json" if out_dir else None)
    print(text, end="")
    return EXIT_OK


# --- tables ---

def compute_table_reproduction() -> dict:
    """Recompute accuracy/kappa and per-category metrics from the shipped
    matrices and pair them with the published values plus absolute deltas."""
    reported = load_reported()
    cohorts = {}
    for cohort in COHORTS:
        cm = load_confusion(cohort)
        rep = reported[cohort]
        acc = accuracy(cm)
        kap = cohen_kappa(cm)
        per_cat = {}
        for k, cat in enumerate(CATEGORY_ORDER):
            mine = per_category(cm, k).to_json()
            rep_cat = rep.per_category[cat.value]
            per_cat[cat.value] = {
                name: {
                    "recomputed": mine[name],
                    "reported": rep_cat[name],
                    "delta": abs(mine[name] - rep_cat[name]),
                }
                for name in METRIC_NAMES
            }
        cohorts[cohort] = {
            "n": cm.n,
            "accuracy": {"recomputed": acc, "reported": rep.accuracy,
                         "delta": abs(acc - rep.accuracy)},
            "kappa": {"recomputed": kap, "reported": rep.kappa,
                      "delta": abs(kap - rep.kappa)},
            "per_category": per_cat,
            "confusion": cm.to_json(),
        }
    return {"tool_version": __version__, "cohorts": cohorts}


def _tables_text(doc: dict) -> str:
    lines = ["cohort overall metrics (recomputed / reported / |delta|):"]
    for cohort, block in doc["cohorts"].items():
        acc, kap = block["accuracy"], block["kappa"]
        lines.append(
            f"  {cohort:<28} acc {acc['recomputed']:.3f}/{acc['reported']:.3f}/"
            f"{acc['delta']:.3f}   kappa {kap['recomputed']:.3f}/{kap['reported']:.3f}/"
            f"{kap['delta']:.3f}"
        )
    lines.append("per-category (recomputed / reported / |delta|):")
    for cohort, block in doc["cohorts"].items():
        for cat, metrics in block["per_category"].items():
            cells = "  ".join(
                f"{name[:4]} {m['recomputed']:.3f}/{m['reported']:.3f}/{m['delta']:.3f}"
                for name, m in metrics.items()
            )
            lines.append(f"  {cohort:<28} {cat:<8} {cells}")
    return "\n".join(lines)


def run_tables(args) -> int:
    doc = compute_table_reproduction()
    print(_tables_text(doc))
    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_lines = ["cohort,category,metric,recomputed,reported,delta"]
        for cohort, block in doc["cohorts"].items():
            for name in ("accuracy", "kappa"):
                m = block[name]
                csv_lines.append(
                    f"{cohort},overall,{name},{m['recomputed']!r},{m['reported']!r},{m['delta']!r}"
                )
            for cat, metrics in block["per_category"].items():
                for name, m in metrics.items():
                    csv_lines.append(
                        f"{cohort},{cat},{name},{m['recomputed']!r},{m['reported']!r},{m['delta']!r}"
                    )
        (out_dir / "tables.csv").write_text("\n".join(csv_lines) + "\n")
    text = emit_json(doc, out_dir / "tables.json" if out_dir else None)
    print(text, end="")
    return EXIT_OK


# --- segment ---

def run_segment(args) -> int:
    if bool(args.manifest) == bool(args.dicom_dir):
        raise InvalidManifestError("segment needs exactly one of --manifest/--payload or --dicom-dir")
    if args.manifest:
        if not args.payload:
            raise InvalidManifestError("--manifest requires --payload")
        volume = read_raw_volume(args.manifest, args.payload)
    else:
        volume = load_dicom_dir(args.dicom_dir)
    roi = None
    if args.roi:
        bounds = args.roi
        roi = ((bounds[0], bounds[1]), (bounds[2], bounds[3]), (bounds[4], bounds[5]))
    threshold = args.hu_threshold if args.hu_threshold is not None else 130.0
    mask = threshold_segment(volume, threshold, roi)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_mask(mask, out_dir / "mask.manifest", out_dir / "mask.bits")
    doc = {
        "tool_version": __version__,
        "hu_threshold": threshold,
        "roi": [list(b) for b in roi] if roi else None,
        "shape": list(mask.shape),
        "true_voxels": int(mask.sum()),
        "outputs": ["mask.manifest", "mask.bits"],
    }
    print(emit_json(doc, out_dir / "segment.json"), end="")
    return EXIT_OK


# --- mask-convert ---

def run_mask_convert(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.to == "pgm":
        if not (args.manifest and args.payload):
            raise InvalidManifestError("--to pgm needs --manifest and --payload")
        mask = read_mask(args.manifest, args.payload)
        names = []
        for k, doc in enumerate(mask_to_pgm_slices(mask)):
            name = f"slice_{k:04d}.pgm"
            (out_dir / name).write_text(doc)
            names.append(name)
        summary = {"tool_version": __version__, "shape": list(mask.shape), "outputs": names}
    else:  # packed
        if not args.pgm:
            raise InvalidManifestError("--to packed needs one or more --pgm files")
        try:
            docs = [Path(p).read_text() for p in args.pgm]
        except FileNotFoundError as exc:
            raise InvalidManifestError(f"pgm file missing: {exc}") from exc
        mask = pgm_slices_to_mask(docs)
        write_mask(mask, out_dir / "mask.manifest", out_dir / "mask.bits")
        summary = {
            "tool_version": __version__,
            "shape": list(mask.shape),
            "outputs": ["mask.manifest", "mask.bits"],
        }
    print(emit_json(summary), end="")
    return EXIT_OK


# --- entry point ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cacscore",
        description="Coronary calcium scoring, cohort evaluation, and mask tooling",
    )
    parser.add_argument("--version", action="version", version=f"cacscore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one study manifest")
    p.add_argument("study", help="study manifest (JSON)")
    p.add_argument("--output-dir")
    _add_config_flags(p)
    p.set_defaults(func=run_score)

    p = sub.add_parser("evaluate", help="evaluate a cohort against ground truth")
    p.add_argument("cohort", help="cohort manifest (JSON)")
    p.add_argument("--output-dir")
    _add_config_flags(p)
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("tables", help="reproduce shipped published-matrix metrics")
    p.add_argument("--output-dir")
    p.set_defaults(func=run_tables)

    p = sub.add_parser("segment", help="threshold-baseline mask from a volume")
    p.add_argument("--manifest", help="raw volume manifest path")
    p.add_argument("--payload", help="raw volume payload path")
    p.add_argument("--dicom-dir", dest="dicom_dir", help="directory of .dcm slices")
    p.add_argument("--hu-threshold", type=float, dest="hu_threshold")
    p.add_argument("--roi", type=int, nargs=6, metavar=("S0", "S1", "R0", "R1", "C0", "C1"))
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=run_segment)

    p = sub.add_parser("mask-convert", help="convert packed masks to/from PGM slices")
    p.add_argument("--to", choices=["pgm", "packed"], required=True)
    p.add_argument("--manifest", help="mask manifest (for --to pgm)")
    p.add_argument("--payload", help="mask payload (for --to pgm)")
    p.add_argument("--pgm", nargs="+", help="PGM slice files (for --to packed)")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=run_mask_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProviderError as exc:
        _print_error("provider_error", exc)
        return EXIT_PROVIDER_ERROR
    except (CacError, FileNotFoundError) as exc:
        _print_error("input_error", exc)
        return EXIT_INPUT_ERROR
    except Exception as exc:  # noqa: BLE001 - partition demands a catch-all
        _print_error("internal_error", exc)
        return EXIT_INTERNAL_ERROR


def _print_error(kind: str, exc: Exception) -> None:
    record = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(record, indent=2), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
