"""Raw 16-bit volume fixture format: textual manifest + little-endian payload.

The format is deliberately codec-free so any language can produce or consume
it. A manifest is a UTF-8 key/value document ("key: value" per line, '#'
comments), with keys shape, spacing_mm, value_semantics (hu|raw), slope,
intercept, byte_order (little only). The payload is the voxel grid in C order
(slice-major, then row, then col), two bytes per voxel.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidManifestError, LengthMismatchError
from .volume import Volume, rescale_to_hu

_KEYS = {"shape", "spacing_mm", "value_semantics", "slope", "intercept", "byte_order"}


@dataclass(frozen=True)
class RawVolumeManifest:
    shape: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    value_semantics: str = "hu"  # "hu" | "raw"
    slope: float = 1.0
    intercept: float = 0.0
    byte_order: str = "little"

    def __post_init__(self):
        if len(self.shape) != 3 or any(s <= 0 for s in self.shape):
            raise InvalidManifestError(f"bad shape {self.shape}")
        if len(self.spacing_mm) != 3 or any(s <= 0 for s in self.spacing_mm):
            raise InvalidManifestError(f"bad spacing {self.spacing_mm}")
        if self.value_semantics not in ("hu", "raw"):
            raise InvalidManifestError(
                f"value_semantics must be 'hu' or 'raw', got {self.value_semantics!r}"
            )
        if self.byte_order != "little":
            raise InvalidManifestError(f"byte_order must be 'little', got {self.byte_order!r}")

    @property
    def n_bytes(self) -> int:
        n, r, c = self.shape
        return n * r * c * 2


def _parse_kv(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise InvalidManifestError(f"line {lineno}: expected 'key: value', got {line!r}")
        key, _, value = stripped.partition(":")
        pairs[key.strip()] = value.strip()
    return pairs


def parse_manifest(text: str) -> RawVolumeManifest:
    pairs = _parse_kv(text)
    unknown = set(pairs) - _KEYS
    if unknown:
        raise InvalidManifestError(f"unknown manifest keys {sorted(unknown)}")
    for required in ("shape", "spacing_mm"):
        if required not in pairs:
            raise InvalidManifestError(f"manifest missing required key {required!r}")
    try:
        shape = tuple(int(v) for v in pairs["shape"].split())
        spacing = tuple(float(v) for v in pairs["spacing_mm"].split())
        slope = float(pairs.get("slope", "1.0"))
        intercept = float(pairs.get("intercept", "0.0"))
    except ValueError as exc:
        raise InvalidManifestError(f"non-numeric manifest value: {exc}") from exc
    return RawVolumeManifest(
        shape=shape,  # type: ignore[arg-type]
        spacing_mm=spacing,  # type: ignore[arg-type]
        value_semantics=pairs.get("value_semantics", "hu"),
        slope=slope,
        intercept=intercept,
        byte_order=pairs.get("byte_order", "little"),
    )


def format_manifest(manifest: RawVolumeManifest) -> str:
    return (
        f"shape: {manifest.shape[0]} {manifest.shape[1]} {manifest.shape[2]}\n"
        f"spacing_mm: {manifest.spacing_mm[0]!r} {manifest.spacing_mm[1]!r} "
        f"{manifest.spacing_mm[2]!r}\n"
        f"value_semantics: {manifest.value_semantics}\n"
        f"slope: {manifest.slope!r}\n"
        f"intercept: {manifest.intercept!r}\n"
        f"byte_order: {manifest.byte_order}\n"
    )


def load_raw_volume(manifest: RawVolumeManifest | str, payload: bytes) -> Volume:
    """Build a Volume from a manifest (text or parsed) and its payload bytes."""
    if isinstance(manifest, str):
        manifest = parse_manifest(manifest)
    if len(payload) != manifest.n_bytes:
        raise LengthMismatchError(
            f"payload holds {len(payload)} bytes, manifest declares {manifest.n_bytes}"
        )
    grid = np.frombuffer(payload, dtype="<i2").reshape(manifest.shape)
    if manifest.value_semantics == "raw":
        grid = rescale_to_hu(grid, manifest.slope, manifest.intercept)
    return Volume(hu=grid, spacing_mm=manifest.spacing_mm)


def save_raw_volume(volume: Volume) -> tuple[str, bytes]:
    """Serialize a Volume as (manifest text, payload bytes), HU semantics.

    load_raw_volume(*save_raw_volume(v)) reproduces v's grid and spacing, and
    a save -> load -> save cycle is byte-stable.
    """
    manifest = RawVolumeManifest(shape=volume.shape, spacing_mm=volume.spacing_mm)
    return format_manifest(manifest), volume.hu.astype("<i2").tobytes()


def read_raw_volume(manifest_path: str | Path, payload_path: str | Path) -> Volume:
    return load_raw_volume(
        Path(manifest_path).read_text(), Path(payload_path).read_bytes()
    )


def write_raw_volume(volume: Volume, manifest_path: str | Path, payload_path: str | Path) -> None:
    manifest, payload = save_raw_volume(volume)
    Path(manifest_path).write_text(manifest)
    Path(payload_path).write_bytes(payload)
