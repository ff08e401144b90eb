import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cacscore.phantoms import two_lesion_phantom, zero_phantom


@pytest.fixture
def two_lesion():
    volume, mask = two_lesion_phantom()
    return volume, mask


@pytest.fixture
def zero_volume():
    return zero_phantom()


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
