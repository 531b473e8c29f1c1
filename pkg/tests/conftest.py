import numpy as np
import pytest

from atlasmorph.volume import ImageVolume, KIND_INTENSITY, KIND_LABEL


def make_volume(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
                direction=None, kind=KIND_INTENSITY):
    data = np.asarray(data)
    return ImageVolume(
        dims=data.shape[:3],
        spacing=spacing,
        origin=origin,
        direction=np.eye(3) if direction is None else direction,
        data=data,
        kind=kind,
    )


def make_label_volume(data, **kw):
    return make_volume(np.asarray(data, dtype=np.int32), kind=KIND_LABEL, **kw)


def random_rotation(rng):
    """Uniform-ish proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20240412)
