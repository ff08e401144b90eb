#!/usr/bin/env python3
"""Freeze real review-service responses for the frontend's golden tests:
the two-lesion phantom's slice 1 frame (calcium window) and its overlay."""

import base64
import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from cacscore.mask import save_mask
from cacscore.phantoms import two_lesion_phantom
from cacscore.rawio import save_raw_volume
from cacscore.service import create_app

GOLDEN = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "golden"


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    volume, mask = two_lesion_phantom()
    v_manifest, v_payload = save_raw_volume(volume)
    m_manifest, m_payload = save_mask(mask)
    with tempfile.TemporaryDirectory() as store:
        with TestClient(create_app(store_dir=store)) as client:
            created = client.post(
                "/studies",
                json={
                    "study_id": "golden",
                    "volume": {
                        "kind": "inline",
                        "manifest": v_manifest,
                        "payload_b64": base64.b64encode(v_payload).decode(),
                    },
                    "mask": {
                        "source": "inline",
                        "manifest": m_manifest,
                        "payload_b64": base64.b64encode(m_payload).decode(),
                    },
                },
            )
            assert created.status_code == 201, created.text
            frame = client.get("/studies/golden/slices/1", params={"wc": 300, "ww": 1500})
            overlay = client.get("/studies/golden/slices/1/overlay")

    (GOLDEN / "slice1.frame.bin").write_bytes(frame.content)
    (GOLDEN / "slice1.meta.json").write_text(frame.headers["X-Frame-Meta"] + "\n")
    (GOLDEN / "slice1.overlay.json").write_text(
        json.dumps(overlay.json(), indent=2) + "\n"
    )
    print(f"wrote golden service responses to {GOLDEN}")


if __name__ == "__main__":
    main()
