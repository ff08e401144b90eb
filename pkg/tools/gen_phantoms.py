#!/usr/bin/env python3
"""Regenerate the committed phantom fixtures under fixtures/phantoms/."""

import json
from pathlib import Path

from cacscore.mask import write_mask
from cacscore.phantoms import two_lesion_phantom, zero_phantom
from cacscore.rawio import write_raw_volume

ROOT = Path(__file__).resolve().parent.parent / "fixtures" / "phantoms"


def main() -> None:
    ROOT.mkdir(parents=True, exist_ok=True)

    volume, mask = two_lesion_phantom()
    write_raw_volume(volume, ROOT / "two_lesion.manifest", ROOT / "two_lesion.raw")
    write_mask(mask, ROOT / "two_lesion.mask.manifest", ROOT / "two_lesion.mask.bits")
    (ROOT / "two_lesion.study.json").write_text(
        json.dumps(
            {
                "study_id": "two-lesion-phantom",
                "input": {
                    "kind": "raw_fixture",
                    "manifest": "two_lesion.manifest",
                    "payload": "two_lesion.raw",
                },
                "mask": {
                    "source": "file",
                    "manifest": "two_lesion.mask.manifest",
                    "payload": "two_lesion.mask.bits",
                },
                "ground_truth": {"score": 27.84},
            },
            indent=2,
        )
        + "\n"
    )

    zero = zero_phantom()
    write_raw_volume(zero, ROOT / "zero.manifest", ROOT / "zero.raw")
    (ROOT / "zero.study.json").write_text(
        json.dumps(
            {
                "study_id": "zero-phantom",
                "input": {
                    "kind": "raw_fixture",
                    "manifest": "zero.manifest",
                    "payload": "zero.raw",
                },
                "mask": {"source": "threshold"},
                "ground_truth": {"score": 0.0},
            },
            indent=2,
        )
        + "\n"
    )

    (ROOT / "cohort.json").write_text(
        json.dumps(
            {"studies": ["two_lesion.study.json", "zero.study.json"]}, indent=2
        )
        + "\n"
    )
    print(f"wrote phantom fixtures to {ROOT}")


if __name__ == "__main__":
    main()
