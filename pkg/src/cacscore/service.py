"""HTTP review service: upload/reference studies, render slices, list
lesions, apply mask edits with optimistic concurrency, and rescore live.

Sessions persist as append-only edit logs in one on-disk directory per
study; crash recovery replays the log over the initial mask. Edits within a
study serialize on a revision check; reads never block and always reflect a
single (revision, mask, report) snapshot.
"""

from __future__ import annotations

import argparse
import base64
import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response

from . import __version__
from .agatston import AgatstonReport, ScoringConfig, score_lesion, score_patient
from .dicomio import load_dicom_dir
from .errors import CacError, ProviderError
from .lesions import Lesion, extract_lesions
from .mask import (
    Edit,
    apply_edit,
    edit_from_json,
    edit_to_json,
    load_mask,
    save_mask,
    slice_runs,
    threshold_segment,
    voxels_to_runs,
)
from .provider import provider_from_env
from .rawio import load_raw_volume, read_raw_volume, save_raw_volume
from .volume import Volume

DEFAULT_WINDOW_CENTER = 300.0
DEFAULT_WINDOW_WIDTH = 1500.0


def render_frame(volume: Volume, index: int, wc: float, ww: float) -> np.ndarray:
    """Window one slice to 8-bit: clamp((HU - (wc - ww/2)) / ww) * 255,
    floored (so HU == wc lands on 127)."""
    hu = volume.hu[index].astype(np.float64)
    t = np.clip((hu - (wc - ww / 2.0)) / ww, 0.0, 1.0)
    return np.floor(t * 255.0).astype(np.uint8)


@dataclass
class _Snapshot:
    revision: int
    mask: np.ndarray
    report: AgatstonReport
    lesions: list[Lesion]


class StudySession:
    """One study's live state. Edits serialize on a per-session lock; the
    snapshot swap is atomic, so readers see revision r or r+1, never a mix."""

    def __init__(self, study_id: str, volume: Volume, initial_mask: np.ndarray,
                 cfg: ScoringConfig):
        self.study_id = study_id
        self.volume = volume
        self.initial_mask = initial_mask
        self.config = cfg
        self.edits: list[Edit] = []
        self.lock = threading.Lock()
        self.snapshot = self._score(0, initial_mask)

    def _score(self, revision: int, mask: np.ndarray) -> _Snapshot:
        report = score_patient(self.volume, mask, self.config)
        lesions = extract_lesions(
            self.volume, mask, self.config.connectivity, self.config.min_component_area_mm2
        )
        return _Snapshot(revision=revision, mask=mask, report=report, lesions=lesions)

    def apply(self, edit: Edit, expected_revision: int, on_commit=None) -> _Snapshot:
        """Apply one edit under optimistic concurrency; returns the new
        snapshot or raises StaleRevision. on_commit runs inside the lock
        right after the snapshot swap (used to append the durable log in
        edit order)."""
        with self.lock:
            current = self.snapshot
            if expected_revision != current.revision:
                raise StaleRevision(current.revision)
            new_mask = apply_edit(current.mask, edit)
            snapshot = self._score(current.revision + 1, new_mask)
            self.edits.append(edit)
            self.snapshot = snapshot
            if on_commit is not None:
                on_commit()
            return snapshot

    def replay(self, edits: list[Edit]) -> None:
        """Rebuild state from the initial mask plus a recovered edit log."""
        mask = self.initial_mask
        for edit in edits:
            mask = apply_edit(mask, edit)
        self.edits = list(edits)
        self.snapshot = self._score(len(edits), mask)


class StaleRevision(Exception):
    def __init__(self, current: int):
        super().__init__(f"expected revision {current}")
        self.current = current


class StudyStore:
    """Append-only on-disk persistence: one directory per study holding the
    volume, the initial mask, the scoring config, and edits.jsonl."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def dir_for(self, study_id: str) -> Path:
        return self.root / study_id

    def persist_new(self, session: StudySession) -> None:
        d = self.dir_for(session.study_id)
        d.mkdir(parents=True, exist_ok=True)
        manifest, payload = save_raw_volume(session.volume)
        (d / "volume.manifest").write_text(manifest)
        (d / "volume.raw").write_bytes(payload)
        m_manifest, m_payload = save_mask(session.initial_mask)
        (d / "mask.initial.manifest").write_text(m_manifest)
        (d / "mask.initial.bits").write_bytes(m_payload)
        (d / "config.json").write_text(json.dumps(session.config.to_json(), indent=2) + "\n")
        (d / "edits.jsonl").write_text("")

    def append_edit(self, study_id: str, edit: Edit) -> None:
        with (self.dir_for(study_id) / "edits.jsonl").open("a") as fh:
            fh.write(json.dumps(edit_to_json(edit)) + "\n")

    def recover(self) -> list[StudySession]:
        sessions = []
        for d in sorted(self.root.iterdir()):
            if not (d / "volume.manifest").exists():
                continue
            volume = load_raw_volume(
                (d / "volume.manifest").read_text(), (d / "volume.raw").read_bytes()
            )
            mask = load_mask(
                (d / "mask.initial.manifest").read_text(),
                (d / "mask.initial.bits").read_bytes(),
            )
            cfg = ScoringConfig.from_json(json.loads((d / "config.json").read_text()))
            session = StudySession(d.name, volume, mask, cfg)
            log = d / "edits.jsonl"
            if log.exists():
                edits = [
                    edit_from_json(json.loads(line))
                    for line in log.read_text().splitlines()
                    if line.strip()
                ]
                if edits:
                    session.replay(edits)
            sessions.append(session)
        return sessions


def _lesion_summary(lesion: Lesion, session: StudySession) -> dict:
    voxels = np.array(lesion.voxels, dtype=np.float64)
    centroid = voxels.mean(axis=0).tolist()
    return {
        "id": lesion.id,
        "score": score_lesion(lesion, session.volume, session.config),
        "max_hu": lesion.max_hu,
        "total_area_mm2": lesion.total_area_mm2,
        "slice_span": list(lesion.slice_span),
        "centroid": centroid,
    }


def _report_json(session: StudySession, snapshot: _Snapshot) -> dict:
    doc = {"study_id": session.study_id, "revision": snapshot.revision}
    doc.update(snapshot.report.to_json())
    return doc


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(
    store_dir: str | Path | None = None,
    provider_transport=None,
) -> FastAPI:
    """Build the review service. store_dir defaults to ./cacscore-studies;
    existing sessions there are recovered by replaying their edit logs."""
    app = FastAPI(title="cacscore review service", version=__version__)
    store = StudyStore(Path(store_dir) if store_dir else Path("cacscore-studies"))
    sessions: dict[str, StudySession] = {s.study_id: s for s in store.recover()}
    creation_lock = threading.Lock()

    def get_session(study_id: str) -> StudySession:
        session = sessions.get(study_id)
        if session is None:
            raise HTTPException(404, f"unknown study {study_id!r}")
        return session

    def load_volume_spec(spec) -> Volume:
        if not isinstance(spec, dict) or "kind" not in spec:
            raise HTTPException(400, "volume spec needs a 'kind'")
        try:
            kind = spec["kind"]
            if kind == "inline":
                return load_raw_volume(spec["manifest"], base64.b64decode(spec["payload_b64"]))
            if kind == "raw_fixture":
                return read_raw_volume(spec["manifest_path"], spec["payload_path"])
            if kind == "dicom_dir":
                return load_dicom_dir(spec["path"])
        except HTTPException:
            raise
        except (CacError, KeyError, ValueError, OSError) as exc:
            raise HTTPException(400, f"malformed volume input: {exc}") from exc
        raise HTTPException(400, f"unknown volume kind {spec.get('kind')!r}")

    def load_mask_spec(spec, volume: Volume, cfg: ScoringConfig) -> np.ndarray:
        if not isinstance(spec, dict) or "source" not in spec:
            raise HTTPException(400, "mask spec needs a 'source'")
        source = spec["source"]
        try:
            if source == "inline":
                mask = load_mask(spec["manifest"], base64.b64decode(spec["payload_b64"]))
            elif source == "file":
                mask = load_mask(
                    Path(spec["manifest_path"]).read_text(),
                    Path(spec["payload_path"]).read_bytes(),
                )
            elif source == "threshold":
                roi = spec.get("roi")
                if roi is not None:
                    roi = tuple((int(lo), int(hi)) for lo, hi in roi)
                mask = threshold_segment(
                    volume, float(spec.get("hu_threshold", cfg.hu_threshold)), roi
                )
            elif source == "provider":
                client = provider_from_env(
                    spec.get("endpoint"), transport=provider_transport
                )
                slice_range = spec.get("slice_range")
                if slice_range is not None:
                    slice_range = (int(slice_range[0]), int(slice_range[1]))
                mask = client.fetch_mask(volume, slice_range)
            else:
                raise HTTPException(400, f"unknown mask source {source!r}")
        except HTTPException:
            raise
        except ProviderError as exc:
            raise HTTPException(502, f"mask provider failed: {exc}") from exc
        except (CacError, KeyError, ValueError, OSError) as exc:
            raise HTTPException(400, f"malformed mask input: {exc}") from exc
        if mask.shape != volume.shape:
            raise HTTPException(
                422,
                f"mask shape {tuple(mask.shape)} does not match volume shape "
                f"{tuple(volume.shape)}",
            )
        return mask

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__, "studies": len(sessions)}

    @app.post("/studies", status_code=201)
    def create_study(body: dict = Body(...)):
        study_id = str(body.get("study_id") or uuid.uuid4().hex[:12])
        try:
            cfg = ScoringConfig.from_json(body.get("scoring") or {})
        except (ValueError, KeyError) as exc:
            raise HTTPException(400, f"bad scoring config: {exc}") from exc
        volume = load_volume_spec(body.get("volume"))
        mask = load_mask_spec(body.get("mask"), volume, cfg)
        with creation_lock:
            if study_id in sessions:
                raise HTTPException(400, f"study {study_id!r} already exists")
            session = StudySession(study_id, volume, mask, cfg)
            store.persist_new(session)
            sessions[study_id] = session
        return _report_json(session, session.snapshot)

    @app.get("/studies/{study_id}")
    def get_study(study_id: str):
        session = get_session(study_id)
        snapshot = session.snapshot
        doc = _report_json(session, snapshot)
        doc["shape"] = list(session.volume.shape)
        doc["spacing_mm"] = list(session.volume.spacing_mm)
        doc["n_edits"] = len(session.edits)
        return doc

    @app.get("/studies/{study_id}/slices/{index}")
    def get_slice(
        study_id: str,
        index: int,
        wc: float = DEFAULT_WINDOW_CENTER,
        ww: float = DEFAULT_WINDOW_WIDTH,
    ):
        session = get_session(study_id)
        if not 0 <= index < session.volume.shape[0]:
            raise HTTPException(416, f"slice {index} out of range")
        if ww <= 0:
            raise HTTPException(400, "window width must be positive")
        snapshot = session.snapshot
        frame = render_frame(session.volume, index, wc, ww)
        meta = {
            "shape": list(frame.shape),
            "revision": snapshot.revision,
            "slice": index,
            "wc": wc,
            "ww": ww,
        }
        return Response(
            content=frame.tobytes(),
            media_type="application/octet-stream",
            headers={"X-Frame-Meta": json.dumps(meta)},
        )

    @app.get("/studies/{study_id}/slices/{index}/overlay")
    def get_overlay(study_id: str, index: int):
        session = get_session(study_id)
        if not 0 <= index < session.volume.shape[0]:
            raise HTTPException(416, f"slice {index} out of range")
        snapshot = session.snapshot
        lesion_runs = []
        for lesion in snapshot.lesions:
            cells = [(r, c) for s, r, c in lesion.voxels if s == index]
            if cells:
                lesion_runs.append(
                    {"id": lesion.id, "runs": [list(run) for run in voxels_to_runs(cells)]}
                )
        return {
            "revision": snapshot.revision,
            "slice": index,
            "shape": list(snapshot.mask.shape[1:]),
            "runs": [list(run) for run in slice_runs(snapshot.mask[index])],
            "lesion_runs": lesion_runs,
        }

    @app.get("/studies/{study_id}/lesions")
    def list_lesions(study_id: str):
        session = get_session(study_id)
        snapshot = session.snapshot
        summaries = sorted(
            (_lesion_summary(lesion, session) for lesion in snapshot.lesions),
            key=lambda s: -s["score"],
        )
        return {"revision": snapshot.revision, "lesions": summaries}

    @app.post("/studies/{study_id}/edits")
    def post_edit(study_id: str, body: dict = Body(...)):
        session = get_session(study_id)
        if "expected_revision" not in body:
            raise HTTPException(400, "edit body needs expected_revision")
        try:
            edit = edit_from_json(body.get("edit") or {})
        except (ValueError, KeyError, TypeError) as exc:
            raise HTTPException(422, f"invalid edit: {exc}") from exc
        try:
            snapshot = session.apply(
                edit,
                int(body["expected_revision"]),
                on_commit=lambda: store.append_edit(study_id, edit),
            )
        except StaleRevision as exc:
            raise HTTPException(
                409,
                f"revision conflict: expected {body['expected_revision']}, "
                f"current is {exc.current}",
            ) from exc
        except CacError as exc:
            raise HTTPException(422, f"invalid edit: {exc}") from exc
        return _report_json(session, snapshot)

    @app.get("/studies/{study_id}/export")
    def export_study(study_id: str):
        session = get_session(study_id)
        snapshot = session.snapshot
        manifest, payload = save_mask(snapshot.mask)
        doc = _report_json(session, snapshot)
        doc["mask"] = {"manifest": manifest, "payload_b64": _b64(payload)}
        doc["edit_history"] = [edit_to_json(e) for e in session.edits]
        return doc

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cacscore-review", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--store-dir", default="cacscore-studies")
    args = parser.parse_args(argv)

    import uvicorn

    uvicorn.run(create_app(args.store_dir), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
