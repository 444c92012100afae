import numpy as np
import pytest
from hypothesis import settings

from spikecam import IntensityImage, SpikeStream, fit_niqe_model, synthetic_scene

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


def constant_image(value: float, h: int = 8, w: int = 8) -> IntensityImage:
    return IntensityImage(np.full((h, w), float(value)))


def random_stream(seed: int, k: int, h: int, w: int, density: float = 0.5) -> SpikeStream:
    rng = np.random.default_rng(seed)
    return SpikeStream.from_dense(rng.random((k, h, w)) < density)


def nested_saltpepper(img: IntensityImage, p: float, seed: int = 77) -> IntensityImage:
    """Corrupt a fixed pixel set that grows with p, so p1 < p2 corrupts a superset."""
    rng = np.random.default_rng(seed)
    u = rng.random(img.values.shape)
    salt = rng.random(img.values.shape) < 0.5
    arr = img.values.copy()
    mask = u < p
    arr[mask] = np.where(salt[mask], 1.0, 0.0)
    return IntensityImage(arr)


@pytest.fixture(scope="session")
def pristine_corpus():
    return [synthetic_scene(384, 384, seed=i) for i in range(24)]


@pytest.fixture(scope="session")
def niqe_model(pristine_corpus):
    return fit_niqe_model(pristine_corpus)


@pytest.fixture(scope="session")
def small_niqe_model():
    """Quick model for 64x64 pipeline and CLI tests (patch size 16)."""
    corpus = [synthetic_scene(64, 64, seed=200 + i, n_shapes=3) for i in range(10)]
    return fit_niqe_model(corpus, patch_size=16)
