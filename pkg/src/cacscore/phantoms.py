"""Synthetic validation phantoms with hand-derivable scores.

The two-lesion phantom is laid out on a 0.2 x 0.2 mm grid so both lesion
scores come out exact: 98 voxels at 250 HU give 2 x 3.92 = 7.84, and a
two-slice lesion (50 voxels at 180 HU over 75 voxels at 450 HU, in-plane
areas 2.0 and 3.0 mm2) gives 4 x 5.0 = 20.0 lesion-specific vs
1x2.0 + 4x3.0 = 14.0 classic.
"""

from __future__ import annotations

import numpy as np

from .volume import Volume

AIR_HU = -1000

TWO_LESION_TOTAL = 27.84
LESION_A_SCORE = 7.84  # slice 0, component 1
LESION_B_SCORE = 20.0  # slices 1-2, component 2
LESION_B_CLASSIC_SCORE = 14.0


def zero_phantom(shape=(2, 8, 8), spacing=(3.0, 0.5, 0.5)) -> Volume:
    """Uniform air volume; any threshold mask on it is empty."""
    return Volume(hu=np.full(shape, AIR_HU, dtype=np.int16), spacing_mm=spacing)


def two_lesion_phantom() -> tuple[Volume, np.ndarray]:
    """Air volume containing two disjoint calcifications, plus their mask.

    Component 1 (slice 0): 10x10 block minus two corner voxels, 250 HU.
    Component 2 (slices 1-2): 5x10 at 180 HU under 5x15 at 450 HU.
    """
    hu = np.full((4, 40, 40), AIR_HU, dtype=np.int16)

    hu[0, 2:12, 2:12] = 250
    hu[0, 2, 2] = AIR_HU
    hu[0, 2, 3] = AIR_HU

    hu[1, 20:25, 20:30] = 180
    hu[2, 20:25, 20:35] = 450

    volume = Volume(hu=hu, spacing_mm=(3.0, 0.2, 0.2))
    mask = volume.hu >= 130
    return volume, mask
