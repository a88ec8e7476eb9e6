import numpy as np
import pytest

from dsr.volumes import DepthVolume, FrameDims, IntensityVolume


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dims():
    return FrameDims(12, 10, 3)


@pytest.fixture
def random_volume(rng, small_dims):
    return DepthVolume(small_dims, rng.uniform(1.0, 9.0, small_dims.total_voxels))


@pytest.fixture
def random_guide(rng, small_dims):
    return IntensityVolume(small_dims, rng.uniform(0.0, 1.0, small_dims.total_voxels))
