import base64
import json

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from cacscore.mask import load_mask, save_mask
from cacscore.phantoms import (
    LESION_A_SCORE,
    LESION_B_SCORE,
    TWO_LESION_TOTAL,
    two_lesion_phantom,
    zero_phantom,
)
from cacscore.rawio import save_raw_volume
from cacscore.service import create_app


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def inline_volume(volume) -> dict:
    manifest, payload = save_raw_volume(volume)
    return {"kind": "inline", "manifest": manifest, "payload_b64": b64(payload)}


def inline_mask(mask) -> dict:
    manifest, payload = save_mask(mask)
    return {"source": "inline", "manifest": manifest, "payload_b64": b64(payload)}


@pytest.fixture
def client(tmp_path):
    app = create_app(store_dir=tmp_path / "store")
    with TestClient(app) as c:
        yield c


@pytest.fixture
def two_lesion_study(client):
    volume, mask = two_lesion_phantom()
    response = client.post(
        "/studies",
        json={
            "study_id": "phantom",
            "volume": inline_volume(volume),
            "mask": inline_mask(mask),
        },
    )
    assert response.status_code == 201
    return response.json()


class TestCreate:
    def test_zero_phantom_threshold_source(self, client):
        response = client.post(
            "/studies",
            json={"volume": inline_volume(zero_phantom()), "mask": {"source": "threshold"}},
        )
        assert response.status_code == 201
        doc = response.json()
        assert doc["revision"] == 0
        assert doc["total_score"] == 0.0
        assert doc["category"] == "0-10"

    def test_two_lesion_phantom_file_mask(self, two_lesion_study):
        assert two_lesion_study["total_score"] == pytest.approx(TWO_LESION_TOTAL, rel=1e-9)
        assert two_lesion_study["revision"] == 0
        assert two_lesion_study["lesion_count"] == 2

    def test_malformed_volume_400(self, client):
        response = client.post(
            "/studies",
            json={"volume": {"kind": "inline", "manifest": "shape: x", "payload_b64": ""},
                  "mask": {"source": "threshold"}},
        )
        assert response.status_code == 400

    def test_shape_mismatch_422(self, client):
        volume, _ = two_lesion_phantom()
        wrong = np.zeros((1, 2, 2), dtype=bool)
        response = client.post(
            "/studies",
            json={"volume": inline_volume(volume), "mask": inline_mask(wrong)},
        )
        assert response.status_code == 422

    def test_provider_wrong_shape_502(self, tmp_path):
        def handler(request):
            manifest, payload = save_mask(np.zeros((1, 2, 2), dtype=bool))
            return httpx.Response(
                200, json={"manifest": manifest, "payload_b64": b64(payload)}
            )

        app = create_app(
            store_dir=tmp_path / "store", provider_transport=httpx.MockTransport(handler)
        )
        volume, _ = two_lesion_phantom()
        with TestClient(app) as client:
            response = client.post(
                "/studies",
                json={
                    "volume": inline_volume(volume),
                    "mask": {"source": "provider", "endpoint": "http://model/segment"},
                },
            )
        assert response.status_code == 502
        assert "shape" in response.json()["detail"]

    def test_provider_source_end_to_end(self, tmp_path):
        def handler(request):
            doc = json.loads(request.content)
            from cacscore.rawio import load_raw_volume

            volume = load_raw_volume(doc["manifest"], base64.b64decode(doc["payload_b64"]))
            manifest, payload = save_mask(volume.hu >= 130)
            return httpx.Response(
                200, json={"manifest": manifest, "payload_b64": b64(payload)}
            )

        app = create_app(
            store_dir=tmp_path / "store", provider_transport=httpx.MockTransport(handler)
        )
        volume, _ = two_lesion_phantom()
        with TestClient(app) as client:
            response = client.post(
                "/studies",
                json={
                    "volume": inline_volume(volume),
                    "mask": {"source": "provider", "endpoint": "http://model/segment"},
                },
            )
        assert response.status_code == 201
        assert response.json()["total_score"] == pytest.approx(TWO_LESION_TOTAL, rel=1e-9)

    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_fixture_reference_volume_and_file_mask(self, client, tmp_path):
        from cacscore.mask import write_mask
        from cacscore.rawio import write_raw_volume

        volume, mask = two_lesion_phantom()
        write_raw_volume(volume, tmp_path / "v.manifest", tmp_path / "v.raw")
        write_mask(mask, tmp_path / "m.manifest", tmp_path / "m.bits")
        response = client.post(
            "/studies",
            json={
                "volume": {
                    "kind": "raw_fixture",
                    "manifest_path": str(tmp_path / "v.manifest"),
                    "payload_path": str(tmp_path / "v.raw"),
                },
                "mask": {
                    "source": "file",
                    "manifest_path": str(tmp_path / "m.manifest"),
                    "payload_path": str(tmp_path / "m.bits"),
                },
            },
        )
        assert response.status_code == 201
        assert response.json()["total_score"] == pytest.approx(TWO_LESION_TOTAL, rel=1e-9)


class TestSlices:
    def test_window_midpoint_floors_to_127(self, client):
        hu = np.full((1, 2, 2), 300, dtype=np.int16)
        from cacscore.volume import Volume

        volume = Volume(hu=hu, spacing_mm=(3.0, 0.5, 0.5))
        created = client.post(
            "/studies",
            json={"volume": inline_volume(volume), "mask": {"source": "threshold"}},
        ).json()
        response = client.get(
            f"/studies/{created['study_id']}/slices/0", params={"wc": 300, "ww": 1500}
        )
        assert response.status_code == 200
        frame = np.frombuffer(response.content, dtype=np.uint8)
        assert (frame == 127).all()
        meta = json.loads(response.headers["X-Frame-Meta"])
        assert meta["shape"] == [2, 2]
        assert meta["revision"] == 0

    def test_window_clamps(self, client):
        from cacscore.volume import Volume

        hu = np.array([[[-1000, 2000]]], dtype=np.int16)
        volume = Volume(hu=hu, spacing_mm=(3.0, 0.5, 0.5))
        created = client.post(
            "/studies",
            json={"volume": inline_volume(volume), "mask": {"source": "threshold"}},
        ).json()
        response = client.get(
            f"/studies/{created['study_id']}/slices/0", params={"wc": 300, "ww": 1500}
        )
        frame = np.frombuffer(response.content, dtype=np.uint8)
        assert frame[0] == 0       # HU <= wc - ww/2
        assert frame[1] == 255     # HU >= wc + ww/2

    def test_deterministic_frames(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        a = client.get(f"/studies/{study_id}/slices/1", params={"wc": 300, "ww": 1500})
        b = client.get(f"/studies/{study_id}/slices/1", params={"wc": 300, "ww": 1500})
        assert a.content == b.content
        assert a.headers["X-Frame-Meta"] == b.headers["X-Frame-Meta"]

    def test_out_of_range_416(self, two_lesion_study, client):
        assert client.get(f"/studies/{two_lesion_study['study_id']}/slices/99").status_code == 416

    def test_unknown_study_404(self, client):
        assert client.get("/studies/ghost/slices/0").status_code == 404

    def test_overlay_runs(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        doc = client.get(f"/studies/{study_id}/slices/1/overlay").json()
        assert doc["revision"] == 0
        assert doc["runs"] == [[r, 20, 10] for r in range(20, 25)]
        empty = client.get(f"/studies/{study_id}/slices/3/overlay").json()
        assert empty["runs"] == []
        assert empty["lesion_runs"] == []

    def test_overlay_lesion_runs_partition_slice_runs(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        doc = client.get(f"/studies/{study_id}/slices/1/overlay").json()
        assert [entry["id"] for entry in doc["lesion_runs"]] == [2]
        assert doc["lesion_runs"][0]["runs"] == doc["runs"]
        slice0 = client.get(f"/studies/{study_id}/slices/0/overlay").json()
        assert [entry["id"] for entry in slice0["lesion_runs"]] == [1]


class TestLesions:
    def test_ordered_by_descending_score(self, two_lesion_study, client):
        doc = client.get(f"/studies/{two_lesion_study['study_id']}/lesions").json()
        scores = [entry["score"] for entry in doc["lesions"]]
        assert scores == pytest.approx([LESION_B_SCORE, LESION_A_SCORE], rel=1e-9)
        assert doc["lesions"][0]["slice_span"] == [1, 2]

    def test_empty_mask_lists_nothing(self, client):
        created = client.post(
            "/studies",
            json={"volume": inline_volume(zero_phantom()), "mask": {"source": "threshold"}},
        ).json()
        doc = client.get(f"/studies/{created['study_id']}/lesions").json()
        assert doc["lesions"] == []


class TestEdits:
    def test_remove_top_lesion_rescoresto_784(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        top = client.get(f"/studies/{study_id}/lesions").json()["lesions"][0]
        response = client.post(
            f"/studies/{study_id}/edits",
            json={
                "expected_revision": 0,
                "edit": {"op": "remove_component", "component_id": top["id"]},
            },
        )
        assert response.status_code == 200
        doc = response.json()
        assert doc["revision"] == 1
        assert doc["total_score"] == pytest.approx(LESION_A_SCORE, rel=1e-9)
        assert doc["category"] == "0-10"
        remaining = client.get(f"/studies/{study_id}/lesions").json()["lesions"]
        assert len(remaining) == 1

    def test_stale_revision_409_no_state_change(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        ok = client.post(
            f"/studies/{study_id}/edits",
            json={"expected_revision": 0,
                  "edit": {"op": "paint", "voxels": [[3, 0, 0]], "value": True}},
        )
        assert ok.status_code == 200
        stale = client.post(
            f"/studies/{study_id}/edits",
            json={"expected_revision": 0,
                  "edit": {"op": "remove_component", "component_id": 1}},
        )
        assert stale.status_code == 409
        state = client.get(f"/studies/{study_id}").json()
        assert state["revision"] == 1
        assert state["total_score"] == pytest.approx(TWO_LESION_TOTAL, rel=1e-9)

    def test_paint_below_threshold_leaves_total(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        response = client.post(
            f"/studies/{study_id}/edits",
            json={"expected_revision": 0,
                  "edit": {"op": "paint", "voxels": [[3, 1, 1], [3, 1, 2]], "value": True}},
        )
        assert response.status_code == 200
        doc = response.json()
        assert doc["total_score"] == pytest.approx(TWO_LESION_TOTAL, rel=1e-9)

    def test_invalid_edit_422(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        response = client.post(
            f"/studies/{study_id}/edits",
            json={"expected_revision": 0,
                  "edit": {"op": "remove_component", "component_id": 99}},
        )
        assert response.status_code == 422
        assert client.get(f"/studies/{study_id}").json()["revision"] == 0

    def test_unknown_op_422(self, two_lesion_study, client):
        response = client.post(
            f"/studies/{two_lesion_study['study_id']}/edits",
            json={"expected_revision": 0, "edit": {"op": "sharpen"}},
        )
        assert response.status_code == 422


class TestSessionReplay:
    def test_replay_reproduces_every_revision(self):
        """score(replay(initial, edits[0..r])) equals the report stored at r."""
        from cacscore.mask import Paint, RemoveComponent
        from cacscore.service import StudySession
        from cacscore.agatston import ScoringConfig

        volume, mask = two_lesion_phantom()
        session = StudySession("replay", volume, mask, ScoringConfig())
        edits = [
            Paint(((3, 0, 0), (3, 0, 1)), True),
            RemoveComponent(2),
            Paint(((3, 0, 0),), False),
        ]
        recorded = [session.snapshot.report.total_score]
        for r, edit in enumerate(edits):
            snapshot = session.apply(edit, r)
            recorded.append(snapshot.report.total_score)
        for r in range(len(edits) + 1):
            fresh = StudySession("replay-check", volume, mask, ScoringConfig())
            fresh.replay(edits[:r])
            assert fresh.snapshot.revision == r
            assert fresh.snapshot.report.total_score == recorded[r]


class TestExportAndRecovery:
    def test_export_round_trip_preserves_score(self, two_lesion_study, client):
        study_id = two_lesion_study["study_id"]
        client.post(
            f"/studies/{study_id}/edits",
            json={"expected_revision": 0,
                  "edit": {"op": "remove_component", "component_id": 2}},
        )
        export = client.get(f"/studies/{study_id}/export").json()
        assert export["revision"] == 1
        assert len(export["edit_history"]) == 1
        mask = load_mask(export["mask"]["manifest"], base64.b64decode(export["mask"]["payload_b64"]))
        reimported = client.post(
            "/studies",
            json={
                "study_id": "reimport",
                "volume": inline_volume(two_lesion_phantom()[0]),
                "mask": inline_mask(mask),
            },
        ).json()
        assert reimported["total_score"] == export["total_score"]
        assert reimported["category"] == export["category"]

    def test_export_before_edits_has_empty_history(self, two_lesion_study, client):
        export = client.get(f"/studies/{two_lesion_study['study_id']}/export").json()
        assert export["edit_history"] == []
        assert export["category"] == two_lesion_study["category"]

    def test_recovery_replays_edit_log(self, tmp_path):
        store = tmp_path / "store"
        volume, mask = two_lesion_phantom()
        with TestClient(create_app(store_dir=store)) as client:
            client.post(
                "/studies",
                json={"study_id": "persist", "volume": inline_volume(volume),
                      "mask": inline_mask(mask)},
            )
            client.post(
                "/studies/persist/edits",
                json={"expected_revision": 0,
                      "edit": {"op": "remove_component", "component_id": 2}},
            )
            live = client.get("/studies/persist").json()
        # new app instance over the same directory: replay must reproduce state
        with TestClient(create_app(store_dir=store)) as client:
            recovered = client.get("/studies/persist").json()
        assert recovered["revision"] == live["revision"] == 1
        assert recovered["total_score"] == live["total_score"]
        assert recovered["category"] == live["category"]
