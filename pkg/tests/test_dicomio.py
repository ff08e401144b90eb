import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cacscore.dicomio import (
    EXPLICIT_VR_LE,
    parse_dicom_slice,
    write_dicom_slice,
)
from cacscore.errors import (
    MalformedElementError,
    MissingRequiredTagError,
    UnsupportedTransferSyntaxError,
)
from cacscore.volume import IngestWarning, SliceRecord


def make_record(rows=4, cols=6, spacing=(0.5, 0.5), thickness=3.0, slope=1.0,
                intercept=-1024.0, z=12.5, instance=7, seed=0):
    rng = np.random.default_rng(seed)
    return SliceRecord(
        rows=rows,
        cols=cols,
        pixel_spacing_mm=spacing,
        slice_thickness_mm=thickness,
        rescale_slope=slope,
        rescale_intercept=intercept,
        z_position_mm=z,
        instance_number=instance,
        raw_pixels=rng.integers(-1024, 3000, size=(rows, cols), dtype=np.int16),
    )


class TestRoundTrip:
    def test_explicit_vr(self):
        record = make_record()
        assert parse_dicom_slice(write_dicom_slice(record, explicit=True)) == record

    def test_implicit_vr(self):
        record = make_record(seed=1)
        assert parse_dicom_slice(write_dicom_slice(record, explicit=False)) == record

    def test_without_preamble(self):
        record = make_record(seed=2)
        data = write_dicom_slice(record, with_preamble=False)
        assert parse_dicom_slice(data) == record

    def test_512_square_slice(self):
        record = make_record(rows=512, cols=512, spacing=(0.5, 0.5), slope=1.0,
                             intercept=-1024.0, seed=3)
        parsed = parse_dicom_slice(write_dicom_slice(record))
        assert parsed == record
        assert parsed.rows == 512 and parsed.cols == 512

    @settings(max_examples=40, deadline=None)
    @given(
        rows=st.integers(1, 16),
        cols=st.integers(1, 16),
        row_mm=st.floats(0.1, 2.0, allow_nan=False),
        col_mm=st.floats(0.1, 2.0, allow_nan=False),
        thickness=st.floats(0.5, 5.0, allow_nan=False),
        slope=st.floats(0.25, 4.0, allow_nan=False),
        intercept=st.floats(-2048.0, 2048.0, allow_nan=False),
        z=st.floats(-500.0, 500.0, allow_nan=False),
        instance=st.integers(-99, 9999),
        explicit=st.booleans(),
        seed=st.integers(0, 2**16),
    )
    def test_any_synthesized_record(self, rows, cols, row_mm, col_mm, thickness,
                                    slope, intercept, z, instance, explicit, seed):
        record = make_record(rows, cols, (row_mm, col_mm), thickness, slope,
                             intercept, z, instance, seed)
        assert parse_dicom_slice(write_dicom_slice(record, explicit=explicit)) == record


class TestDefaults:
    def _strip_element(self, record, tag):
        """Rewrite the record without one element by splicing raw bytes."""
        data = write_dicom_slice(record, explicit=True)
        body = data[132:]
        out = b""
        pos = 0
        while pos < len(body):
            group, elem = struct.unpack_from("<HH", body, pos)
            vr = body[pos + 4 : pos + 6].decode()
            if vr in ("OB", "OW", "SQ", "UN", "UT"):
                length = struct.unpack_from("<I", body, pos + 8)[0]
                end = pos + 12 + length
            else:
                length = struct.unpack_from("<H", body, pos + 6)[0]
                end = pos + 8 + length
            if (group, elem) != tag:
                out += body[pos:end]
            pos = end
        return data[:132] + out

    def test_missing_thickness_defaults_with_warning(self):
        data = self._strip_element(make_record(), (0x0018, 0x0050))
        with pytest.warns(IngestWarning, match="SliceThickness"):
            record = parse_dicom_slice(data)
        assert record.slice_thickness_mm == 3.0

    def test_missing_rescale_defaults_with_warning(self):
        data = self._strip_element(make_record(), (0x0028, 0x1053))
        with pytest.warns(IngestWarning, match="Rescale"):
            record = parse_dicom_slice(data)
        assert record.rescale_slope == 1.0
        assert record.rescale_intercept == 0.0

    def test_missing_rows_is_required(self):
        data = self._strip_element(make_record(), (0x0028, 0x0010))
        with pytest.raises(MissingRequiredTagError):
            parse_dicom_slice(data)

    def test_missing_pixel_data_is_required(self):
        data = self._strip_element(make_record(), (0x7FE0, 0x0010))
        with pytest.raises(MissingRequiredTagError):
            parse_dicom_slice(data)


def _with_transfer_syntax(uid: str) -> bytes:
    """Minimal file meta + empty body advertising the given syntax."""
    syntax = uid.encode()
    if len(syntax) % 2:
        syntax += b"\x00"
    meta = struct.pack("<HH", 0x0002, 0x0010) + b"UI" + struct.pack("<H", len(syntax)) + syntax
    return b"\x00" * 128 + b"DICM" + meta


class TestRejections:
    def test_jpeg_encapsulated_syntax(self):
        data = _with_transfer_syntax("1.2.840.10008.1.2.4.90")
        with pytest.raises(UnsupportedTransferSyntaxError):
            parse_dicom_slice(data)

    def test_big_endian_syntax(self):
        data = _with_transfer_syntax("1.2.840.10008.1.2.2")
        with pytest.raises(UnsupportedTransferSyntaxError):
            parse_dicom_slice(data)

    def test_undefined_length_pixel_data(self):
        data = _with_transfer_syntax(EXPLICIT_VR_LE)
        data += struct.pack("<HH", 0x7FE0, 0x0010) + b"OB\x00\x00" + struct.pack("<I", 0xFFFFFFFF)
        with pytest.raises(UnsupportedTransferSyntaxError):
            parse_dicom_slice(data)

    def test_truncated_mid_element(self):
        data = write_dicom_slice(make_record())
        with pytest.raises(MalformedElementError):
            parse_dicom_slice(data[:-10])

    def test_element_overrunning_buffer(self):
        data = _with_transfer_syntax(EXPLICIT_VR_LE)
        data += struct.pack("<HH", 0x0028, 0x0030) + b"DS" + struct.pack("<H", 400) + b"0.5"
        with pytest.raises(MalformedElementError):
            parse_dicom_slice(data)


class TestSkipping:
    def test_unknown_tags_are_skipped(self):
        record = make_record()
        data = write_dicom_slice(record, explicit=True)
        # splice an unrelated element (0008,0060) Modality ahead of the body
        extra = struct.pack("<HH", 0x0008, 0x0060) + b"CS" + struct.pack("<H", 2) + b"CT"
        spliced = data[:132] + extra + data[132:]
        assert parse_dicom_slice(spliced) == record
