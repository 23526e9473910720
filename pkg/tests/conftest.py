import numpy as np
import pytest

from erpmotion.synth import SceneSpec, render


@pytest.fixture(scope="session")
def blob_image():
    """Band-limited textured ERP test image, 128x256x3."""
    return render(SceneSpec(h=128, w=256, frames=1, texture="blobs", seed=42, blob_sigma=0.25))[0]


@pytest.fixture(scope="session")
def blob_image_large():
    """Textured ERP image at 240x480 for estimator checks."""
    return render(SceneSpec(h=240, w=480, frames=1, texture="blobs", seed=5))[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
