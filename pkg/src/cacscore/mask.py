"""Binary calcification masks: wire format, thresholding, and edits.

In memory a mask is a plain bool ndarray shaped like its volume. On the wire
it is a textual manifest (shape, bit_order) plus row-major packed bits with
the last byte zero-padded — the same format the review service and external
mask providers speak.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvalidManifestError,
    LengthMismatchError,
    RoiOutOfBoundsError,
    ShapeMismatchError,
    UnknownComponentError,
    VoxelOutOfBoundsError,
)
from .lesions import Connectivity, label_components
from .rawio import _parse_kv
from .volume import Volume

_MASK_KEYS = {"shape", "bit_order"}
_BIT_ORDERS = {"msb": "big", "lsb": "little"}


def save_mask(mask: np.ndarray, bit_order: str = "msb") -> tuple[str, bytes]:
    """Serialize a mask as (manifest text, packed-bit payload)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 3:
        raise ValueError(f"mask must be 3-dimensional, got shape {mask.shape}")
    if bit_order not in _BIT_ORDERS:
        raise InvalidManifestError(f"bit_order must be 'msb' or 'lsb', got {bit_order!r}")
    manifest = (
        f"shape: {mask.shape[0]} {mask.shape[1]} {mask.shape[2]}\n"
        f"bit_order: {bit_order}\n"
    )
    payload = np.packbits(mask.reshape(-1), bitorder=_BIT_ORDERS[bit_order]).tobytes()
    return manifest, payload


def load_mask(manifest: str, payload: bytes) -> np.ndarray:
    """Inverse of save_mask; load∘save and save∘load are identities."""
    pairs = _parse_kv(manifest)
    unknown = set(pairs) - _MASK_KEYS
    if unknown:
        raise InvalidManifestError(f"unknown mask manifest keys {sorted(unknown)}")
    if "shape" not in pairs:
        raise InvalidManifestError("mask manifest missing required key 'shape'")
    try:
        shape = tuple(int(v) for v in pairs["shape"].split())
    except ValueError as exc:
        raise InvalidManifestError(f"bad shape value: {exc}") from exc
    if len(shape) != 3 or any(s <= 0 for s in shape):
        raise InvalidManifestError(f"bad mask shape {shape}")
    bit_order = pairs.get("bit_order", "msb")
    if bit_order not in _BIT_ORDERS:
        raise InvalidManifestError(f"bit_order must be 'msb' or 'lsb', got {bit_order!r}")
    n = shape[0] * shape[1] * shape[2]
    expected_bytes = (n + 7) // 8
    if len(payload) != expected_bytes:
        raise LengthMismatchError(
            f"payload holds {len(payload)} bytes, shape {shape} needs {expected_bytes}"
        )
    bits = np.unpackbits(
        np.frombuffer(payload, dtype=np.uint8), bitorder=_BIT_ORDERS[bit_order]
    )[:n]
    return bits.astype(bool).reshape(shape)


def read_mask(manifest_path: str | Path, payload_path: str | Path) -> np.ndarray:
    return load_mask(Path(manifest_path).read_text(), Path(payload_path).read_bytes())


def write_mask(mask: np.ndarray, manifest_path: str | Path, payload_path: str | Path) -> None:
    manifest, payload = save_mask(mask)
    Path(manifest_path).write_text(manifest)
    Path(payload_path).write_bytes(payload)


def threshold_segment(
    volume: Volume,
    hu_threshold: float,
    roi: tuple[tuple[int, int], tuple[int, int], tuple[int, int]] | None = None,
) -> np.ndarray:
    """Rule-based baseline mask: true exactly where HU >= threshold, limited
    to the half-open roi box ((s0,s1),(r0,r1),(c0,c1)) when given."""
    if not np.isfinite(hu_threshold):
        raise ValueError(f"hu_threshold must be finite, got {hu_threshold}")
    above = volume.hu >= hu_threshold
    if roi is None:
        return above
    for (lo, hi), extent in zip(roi, volume.shape):
        if not (0 <= lo < hi <= extent):
            raise RoiOutOfBoundsError(f"roi {roi} exceeds volume shape {volume.shape}")
    mask = np.zeros(volume.shape, dtype=bool)
    (s0, s1), (r0, r1), (c0, c1) = roi
    mask[s0:s1, r0:r1, c0:c1] = above[s0:s1, r0:r1, c0:c1]
    return mask


# --- edits (persistent: every edit returns a new mask) ---

@dataclass(frozen=True)
class RemoveComponent:
    component_id: int
    connectivity: Connectivity = Connectivity()


@dataclass(frozen=True)
class Paint:
    voxels: tuple[tuple[int, int, int], ...]
    value: bool


Edit = RemoveComponent | Paint


def apply_edit(mask: np.ndarray, edit: Edit) -> np.ndarray:
    """Apply one edit, returning a new mask; the input is never mutated."""
    mask = np.asarray(mask, dtype=bool)
    if isinstance(edit, RemoveComponent):
        labels, count = label_components(mask, edit.connectivity)
        if not 1 <= edit.component_id <= count:
            raise UnknownComponentError(
                f"component {edit.component_id} does not exist (mask has {count})"
            )
        out = mask.copy()
        out[labels == edit.component_id] = False
        return out
    if isinstance(edit, Paint):
        out = mask.copy()
        for s, r, c in edit.voxels:
            if not (
                0 <= s < mask.shape[0] and 0 <= r < mask.shape[1] and 0 <= c < mask.shape[2]
            ):
                raise VoxelOutOfBoundsError(
                    f"voxel ({s}, {r}, {c}) outside mask shape {mask.shape}"
                )
            out[s, r, c] = edit.value
        return out
    raise TypeError(f"unknown edit type {type(edit).__name__}")


def edit_to_json(edit: Edit) -> dict:
    if isinstance(edit, RemoveComponent):
        return {
            "op": "remove_component",
            "component_id": edit.component_id,
            "connectivity": {
                "in_plane": edit.connectivity.in_plane.value,
                "cross_slice": edit.connectivity.cross_slice.value,
            },
        }
    if isinstance(edit, Paint):
        return {
            "op": "paint",
            "voxels": [list(v) for v in edit.voxels],
            "value": edit.value,
        }
    raise TypeError(f"unknown edit type {type(edit).__name__}")


def edit_from_json(doc: dict) -> Edit:
    op = doc.get("op")
    if op == "remove_component":
        conn = doc.get("connectivity", {})
        return RemoveComponent(
            component_id=int(doc["component_id"]),
            connectivity=Connectivity.from_names(
                conn.get("in_plane", "eight"), conn.get("cross_slice", "full")
            ),
        )
    if op == "paint":
        return Paint(
            voxels=tuple((int(s), int(r), int(c)) for s, r, c in doc["voxels"]),
            value=bool(doc["value"]),
        )
    raise ValueError(f"unknown edit op {op!r}")


# --- human-inspectable export and overlays ---

def mask_to_pgm_slices(mask: np.ndarray) -> list[str]:
    """One plain-text PGM (P2) document per slice, 0 background / 255 mask."""
    mask = np.asarray(mask, dtype=bool)
    docs = []
    for k in range(mask.shape[0]):
        rows, cols = mask.shape[1], mask.shape[2]
        lines = ["P2", f"{cols} {rows}", "255"]
        for r in range(rows):
            lines.append(" ".join("255" if v else "0" for v in mask[k, r]))
        docs.append("\n".join(lines) + "\n")
    return docs


def pgm_slices_to_mask(docs: list[str]) -> np.ndarray:
    """Parse P2 slice documents (mask-convert import path)."""
    slices = []
    for doc in docs:
        tokens: list[str] = []
        for line in doc.splitlines():
            body = line.split("#", 1)[0]
            tokens.extend(body.split())
        if not tokens or tokens[0] != "P2":
            raise InvalidManifestError("expected a plain-text P2 PGM document")
        cols, rows, _maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = np.array([int(t) for t in tokens[4 : 4 + rows * cols]])
        if values.size != rows * cols:
            raise LengthMismatchError(
                f"PGM declares {rows * cols} pixels, found {values.size}"
            )
        slices.append((values > 0).reshape(rows, cols))
    if not slices:
        raise InvalidManifestError("no PGM documents given")
    return np.stack(slices)


def slice_runs(mask_slice: np.ndarray) -> list[tuple[int, int, int]]:
    """Run-length encode one mask slice as (row, start_col, length) triples,
    rows ascending, runs left to right."""
    mask_slice = np.asarray(mask_slice, dtype=bool)
    runs = []
    for r in range(mask_slice.shape[0]):
        row = mask_slice[r]
        edges = np.flatnonzero(np.diff(np.concatenate(([False], row, [False]))))
        for start, stop in zip(edges[::2], edges[1::2]):
            runs.append((r, int(start), int(stop - start)))
    return runs


def runs_to_slice(
    runs: list[tuple[int, int, int]], shape: tuple[int, int]
) -> np.ndarray:
    """Inverse of slice_runs for a known slice shape."""
    out = np.zeros(shape, dtype=bool)
    for r, start, length in runs:
        out[r, start : start + length] = True
    return out


def voxels_to_runs(cells: list[tuple[int, int]]) -> list[tuple[int, int, int]]:
    """Run-length encode sparse (row, col) cells of one slice; same output
    convention as slice_runs."""
    runs = []
    for r, c in sorted(cells):
        if runs and runs[-1][0] == r and runs[-1][1] + runs[-1][2] == c:
            runs[-1] = (r, runs[-1][1], runs[-1][2] + 1)
        else:
            runs.append((r, c, 1))
    return runs
