import numpy as np
import pytest

from chromafix import make_test_image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_texture():
    """64x64 textured image, enough margin for radius-2 searches."""
    return make_test_image(64, 64, seed=3)


@pytest.fixture(scope="session")
def texture_256():
    return make_test_image(256, 256, seed=11)
