"""Minimal uncompressed little-endian DICOM reader/writer.

Covers exactly the tag subset needed to rebuild an HU volume: Rows, Columns,
PixelSpacing, SliceThickness, RescaleSlope/Intercept, ImagePositionPatient,
InstanceNumber, and PixelData. Explicit- and implicit-VR little endian only;
anything compressed or encapsulated is rejected loudly.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import (
    MalformedElementError,
    MissingRequiredTagError,
    UnsupportedTransferSyntaxError,
)
from .volume import (
    REFERENCE_THICKNESS_MM,
    IngestWarning,
    SliceRecord,
    Volume,
    assemble_volume,
)

IMPLICIT_VR_LE = "1.2.840.10008.1.2"
EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"

TAG_ROWS = (0x0028, 0x0010)
TAG_COLS = (0x0028, 0x0011)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_SLICE_THICKNESS = (0x0018, 0x0050)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_IMAGE_POSITION = (0x0020, 0x0032)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)
TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)

_ITEM = (0xFFFE, 0xE000)
_ITEM_DELIM = (0xFFFE, 0xE00D)
_SEQ_DELIM = (0xFFFE, 0xE0DD)

# VRs whose explicit encoding uses a 2-byte reserved field + 4-byte length.
_LONG_VRS = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ", "UC", "UN", "UR", "UT"}

_UNDEFINED = 0xFFFFFFFF


class _Reader:
    """Cursor over a DICOM byte buffer; every read checks the remaining length."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedElementError(
                f"{what}: needs {n} bytes at offset {self.pos}, "
                f"only {self.remaining()} remain"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def _read_element_header(r: _Reader, explicit: bool) -> tuple[tuple[int, int], str | None, int]:
    """Return ((group, elem), vr, length). vr is None under implicit VR."""
    group = r.u16("element tag")
    elem = r.u16("element tag")
    tag = (group, elem)
    if tag in (_ITEM, _ITEM_DELIM, _SEQ_DELIM):
        return tag, None, r.u32("item length")
    if explicit:
        vr = r.take(2, "VR").decode("ascii", errors="replace")
        if vr in _LONG_VRS:
            r.take(2, "VR reserved bytes")
            length = r.u32("element length")
        else:
            length = r.u16("element length")
        return tag, vr, length
    return tag, None, r.u32("element length")


def _skip_undefined_sequence(r: _Reader, explicit: bool) -> None:
    """Advance past an undefined-length sequence, handling nested items."""
    depth = 1
    while depth > 0:
        tag, _, length = _read_element_header(r, explicit)
        if tag == _SEQ_DELIM:
            depth -= 1
        elif tag == _ITEM_DELIM:
            continue
        elif tag == _ITEM:
            if length == _UNDEFINED:
                continue  # contents parsed element by element until its delimiter
            r.take(length, "sequence item")
        elif length == _UNDEFINED:
            depth += 1
        else:
            r.take(length, "nested element value")


def _decode_ds(raw: bytes, tag: str) -> list[float]:
    text = raw.decode("ascii", errors="replace").strip(" \x00")
    if not text:
        raise MalformedElementError(f"{tag}: empty decimal string")
    try:
        return [float(part) for part in text.split("\\")]
    except ValueError as exc:
        raise MalformedElementError(f"{tag}: bad decimal string {text!r}") from exc


def _decode_is(raw: bytes, tag: str) -> int:
    text = raw.decode("ascii", errors="replace").strip(" \x00")
    try:
        return int(text)
    except ValueError as exc:
        raise MalformedElementError(f"{tag}: bad integer string {text!r}") from exc


def _sniff_explicit(data: bytes, offset: int) -> bool:
    """Guess explicit vs implicit VR from the first element past offset."""
    if offset + 6 > len(data):
        return True
    vr = data[offset + 4 : offset + 6]
    return vr.isalpha() and vr.isupper() if vr.isascii() else False


def parse_dicom_slice(data: bytes) -> SliceRecord:
    """Parse one uncompressed little-endian DICOM file into a SliceRecord.

    Accepts the 128-byte preamble + "DICM" form or a bare data set. Missing
    SliceThickness defaults to 3.0 mm and missing rescale to slope 1 /
    intercept 0, each with an IngestWarning.

    Raises UnsupportedTransferSyntaxError for compressed/encapsulated data,
    MissingRequiredTagError when rows/cols/pixel spacing/pixel data are
    absent, MalformedElementError when an element overruns the buffer.
    """
    offset = 0
    if len(data) >= 132 and data[128:132] == b"DICM":
        offset = 132

    r = _Reader(data, offset)

    # File meta group (0002,xxxx) is always explicit little-endian.
    transfer_syntax = None
    while r.remaining() >= 8:
        mark = r.pos
        group = struct.unpack("<H", data[r.pos : r.pos + 2])[0]
        if group != 0x0002:
            break
        tag, vr, length = _read_element_header(r, explicit=True)
        if length == _UNDEFINED:
            raise MalformedElementError("file meta element with undefined length")
        value = r.take(length, f"file meta {tag}")
        if tag == TAG_TRANSFER_SYNTAX:
            transfer_syntax = value.decode("ascii", errors="replace").strip(" \x00")
        del mark

    if transfer_syntax is not None:
        if transfer_syntax == IMPLICIT_VR_LE:
            explicit = False
        elif transfer_syntax == EXPLICIT_VR_LE:
            explicit = True
        else:
            raise UnsupportedTransferSyntaxError(
                f"unsupported transfer syntax {transfer_syntax!r}; "
                "only uncompressed little-endian is handled"
            )
    else:
        explicit = _sniff_explicit(data, r.pos)

    found: dict[tuple[int, int], bytes] = {}
    vr_seen: dict[tuple[int, int], str | None] = {}
    while r.remaining() >= 8:
        tag, vr, length = _read_element_header(r, explicit)
        if tag in (_ITEM, _ITEM_DELIM, _SEQ_DELIM):
            # Top-level item machinery only appears inside sequences we skip;
            # tolerate stray delimiters.
            if tag == _ITEM and length not in (0, _UNDEFINED):
                r.take(length, "stray item")
            continue
        if length == _UNDEFINED:
            if tag == TAG_PIXEL_DATA:
                raise UnsupportedTransferSyntaxError(
                    "encapsulated (compressed) pixel data is not supported"
                )
            _skip_undefined_sequence(r, explicit)
            continue
        value = r.take(length, f"element {tag}")
        if tag in (
            TAG_ROWS,
            TAG_COLS,
            TAG_PIXEL_SPACING,
            TAG_SLICE_THICKNESS,
            TAG_RESCALE_SLOPE,
            TAG_RESCALE_INTERCEPT,
            TAG_IMAGE_POSITION,
            TAG_INSTANCE_NUMBER,
            TAG_PIXEL_DATA,
        ):
            found[tag] = value
            vr_seen[tag] = vr

    for tag, name in (
        (TAG_ROWS, "Rows"),
        (TAG_COLS, "Columns"),
        (TAG_PIXEL_SPACING, "PixelSpacing"),
        (TAG_PIXEL_DATA, "PixelData"),
    ):
        if tag not in found:
            raise MissingRequiredTagError(f"required tag {name} {tag} is missing")

    rows = struct.unpack("<H", found[TAG_ROWS][:2])[0]
    cols = struct.unpack("<H", found[TAG_COLS][:2])[0]
    spacing = _decode_ds(found[TAG_PIXEL_SPACING], "PixelSpacing")
    if len(spacing) != 2:
        raise MalformedElementError(f"PixelSpacing has {len(spacing)} values, expected 2")

    if TAG_SLICE_THICKNESS in found:
        thickness = _decode_ds(found[TAG_SLICE_THICKNESS], "SliceThickness")[0]
    else:
        thickness = REFERENCE_THICKNESS_MM
        warnings.warn(
            f"SliceThickness missing; defaulting to {REFERENCE_THICKNESS_MM} mm",
            IngestWarning,
            stacklevel=2,
        )

    if TAG_RESCALE_SLOPE in found and TAG_RESCALE_INTERCEPT in found:
        slope = _decode_ds(found[TAG_RESCALE_SLOPE], "RescaleSlope")[0]
        intercept = _decode_ds(found[TAG_RESCALE_INTERCEPT], "RescaleIntercept")[0]
    else:
        slope, intercept = 1.0, 0.0
        warnings.warn(
            "RescaleSlope/RescaleIntercept missing; defaulting to 1.0 / 0.0",
            IngestWarning,
            stacklevel=2,
        )

    if TAG_IMAGE_POSITION in found:
        position = _decode_ds(found[TAG_IMAGE_POSITION], "ImagePositionPatient")
        if len(position) != 3:
            raise MalformedElementError(
                f"ImagePositionPatient has {len(position)} values, expected 3"
            )
        z_position = position[2]
    else:
        z_position = 0.0
        warnings.warn(
            "ImagePositionPatient missing; defaulting z to 0.0 "
            "(ordering falls back to InstanceNumber)",
            IngestWarning,
            stacklevel=2,
        )

    if TAG_INSTANCE_NUMBER in found:
        instance = _decode_is(found[TAG_INSTANCE_NUMBER], "InstanceNumber")
    else:
        instance = 0
        warnings.warn("InstanceNumber missing; defaulting to 0", IngestWarning, stacklevel=2)

    pixel_bytes = found[TAG_PIXEL_DATA]
    expected = rows * cols * 2
    if len(pixel_bytes) < expected:
        raise MalformedElementError(
            f"PixelData holds {len(pixel_bytes)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(pixel_bytes[:expected], dtype="<i2").reshape(rows, cols)

    return SliceRecord(
        rows=rows,
        cols=cols,
        pixel_spacing_mm=(spacing[0], spacing[1]),
        slice_thickness_mm=thickness,
        rescale_slope=slope,
        rescale_intercept=intercept,
        z_position_mm=z_position,
        instance_number=instance,
        raw_pixels=pixels,
    )


# --- writer (round-trip partner of the parser; also builds test fixtures) ---

def _ds_bytes(*values: float) -> bytes:
    text = "\\".join(repr(float(v)) for v in values)
    raw = text.encode("ascii")
    return raw + b" " if len(raw) % 2 else raw


def _is_bytes(value: int) -> bytes:
    raw = str(int(value)).encode("ascii")
    return raw + b" " if len(raw) % 2 else raw


def _element(tag: tuple[int, int], vr: str, value: bytes, explicit: bool) -> bytes:
    head = struct.pack("<HH", *tag)
    if explicit:
        if vr in _LONG_VRS:
            return head + vr.encode() + b"\x00\x00" + struct.pack("<I", len(value)) + value
        return head + vr.encode() + struct.pack("<H", len(value)) + value
    return head + struct.pack("<I", len(value)) + value


def write_dicom_slice(
    record: SliceRecord, *, explicit: bool = True, with_preamble: bool = True
) -> bytes:
    """Serialize a SliceRecord as a single-frame DICOM file.

    parse_dicom_slice(write_dicom_slice(r)) == r, field for field.
    """
    syntax = (EXPLICIT_VR_LE if explicit else IMPLICIT_VR_LE).encode("ascii")
    if len(syntax) % 2:
        syntax += b"\x00"
    meta = _element(TAG_TRANSFER_SYNTAX, "UI", syntax, explicit=True)
    meta = _element((0x0002, 0x0000), "UL", struct.pack("<I", len(meta)), explicit=True) + meta

    pixel_bytes = record.raw_pixels.astype("<i2").tobytes()
    body = b"".join(
        (
            _element(TAG_SLICE_THICKNESS, "DS", _ds_bytes(record.slice_thickness_mm), explicit),
            _element(TAG_INSTANCE_NUMBER, "IS", _is_bytes(record.instance_number), explicit),
            _element(
                TAG_IMAGE_POSITION,
                "DS",
                _ds_bytes(0.0, 0.0, record.z_position_mm),
                explicit,
            ),
            _element(TAG_ROWS, "US", struct.pack("<H", record.rows), explicit),
            _element(TAG_COLS, "US", struct.pack("<H", record.cols), explicit),
            _element(TAG_PIXEL_SPACING, "DS", _ds_bytes(*record.pixel_spacing_mm), explicit),
            _element(TAG_RESCALE_INTERCEPT, "DS", _ds_bytes(record.rescale_intercept), explicit),
            _element(TAG_RESCALE_SLOPE, "DS", _ds_bytes(record.rescale_slope), explicit),
            _element(TAG_PIXEL_DATA, "OW", pixel_bytes, explicit),
        )
    )
    prefix = (b"\x00" * 128 + b"DICM") if with_preamble else b""
    return prefix + meta + body


def load_dicom_dir(path: str | Path) -> Volume:
    """Parse every .dcm file under path (non-recursive) and assemble a Volume."""
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".dcm")
    if not files:
        raise MissingRequiredTagError(f"no .dcm files found in {path}")
    records = [parse_dicom_slice(p.read_bytes()) for p in files]
    return assemble_volume(records)
