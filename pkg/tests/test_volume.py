import numpy as np
import pytest

from cacscore.errors import DuplicatePositionError, InconsistentGeometryError
from cacscore.volume import SliceRecord, assemble_volume, to_hu


def make_slice(z, instance=0, rows=4, cols=4, spacing=(0.5, 0.5), thickness=3.0,
               slope=1.0, intercept=0.0, fill=0):
    return SliceRecord(
        rows=rows,
        cols=cols,
        pixel_spacing_mm=spacing,
        slice_thickness_mm=thickness,
        rescale_slope=slope,
        rescale_intercept=intercept,
        z_position_mm=z,
        instance_number=instance,
        raw_pixels=np.full((rows, cols), fill, dtype=np.int16),
    )


class TestToHu:
    def test_rescale(self):
        assert to_hu(1154, 1.0, -1024.0) == 130

    def test_identity(self):
        assert to_hu(0, 1.0, 0.0) == 0

    def test_slope_two(self):
        assert to_hu(100, 2.0, -24.0) == 176

    def test_saturates_at_int16_bounds(self):
        assert to_hu(32767, 10.0, 0.0) == 32767
        assert to_hu(-32768, 10.0, 0.0) == -32768

    def test_affine_up_to_rounding(self, rng):
        for _ in range(200):
            slope = rng.uniform(0.5, 3.0)
            a = int(rng.integers(-2000, 2000))
            b = int(rng.integers(-500, 500))
            delta = to_hu(a + b, slope, 0.0) - to_hu(a, slope, 0.0)
            assert abs(delta - slope * b) <= 1.0


class TestAssembleVolume:
    def test_sorts_by_z(self):
        slices = [make_slice(10.0, 1), make_slice(0.0, 2), make_slice(5.0, 3)]
        vol = assemble_volume(slices)
        assert vol.slice_order == (2, 3, 1)  # z order 0, 5, 10

    def test_median_gap_thickness(self):
        vol = assemble_volume([make_slice(0.0, 1), make_slice(2.5, 2)])
        assert vol.spacing_mm[0] == 2.5

    def test_single_slice_uses_record_thickness(self):
        vol = assemble_volume([make_slice(0.0, 1, thickness=1.25)])
        assert vol.spacing_mm[0] == 1.25

    def test_strictly_increasing_z(self, rng):
        zs = rng.permutation(np.arange(12) * 3.0)
        slices = [make_slice(float(z), i) for i, z in enumerate(zs)]
        vol = assemble_volume(slices)
        by_instance = {s.instance_number: s.z_position_mm for s in slices}
        ordered_z = [by_instance[i] for i in vol.slice_order]
        assert all(a < b for a, b in zip(ordered_z, ordered_z[1:]))

    def test_mismatched_spacing_fails(self):
        slices = [make_slice(0.0, 1), make_slice(3.0, 2, spacing=(0.6, 0.5))]
        with pytest.raises(InconsistentGeometryError):
            assemble_volume(slices)

    def test_mismatched_shape_fails(self):
        slices = [make_slice(0.0, 1), make_slice(3.0, 2, rows=8)]
        with pytest.raises(InconsistentGeometryError):
            assemble_volume(slices)

    def test_duplicate_position_fails(self):
        slices = [make_slice(0.0, 7), make_slice(0.0, 7)]
        with pytest.raises(DuplicatePositionError):
            assemble_volume(slices)

    def test_equal_z_distinct_instance_orders_by_instance(self):
        slices = [make_slice(0.0, 2, fill=2), make_slice(0.0, 1, fill=1)]
        vol = assemble_volume(slices)
        assert vol.slice_order == (1, 2)
        assert vol.hu[0, 0, 0] == 1

    def test_rescale_applied(self):
        vol = assemble_volume([make_slice(0.0, 1, slope=1.0, intercept=-1024.0, fill=1024)])
        assert int(vol.hu[0, 0, 0]) == 0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            assemble_volume([])

    def test_volume_is_read_only(self):
        vol = assemble_volume([make_slice(0.0, 1)])
        with pytest.raises(ValueError):
            vol.hu[0, 0, 0] = 5
