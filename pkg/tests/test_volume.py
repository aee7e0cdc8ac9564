import numpy as np
import pytest

from ktseg.volume import CtVolume, LabelVolume, MaskVolume


def test_ct_volume_casts_and_freezes():
    v = CtVolume(np.zeros((2, 3, 4), dtype=np.float32))
    assert v.shape == (2, 3, 4)
    assert (v.width, v.height, v.depth) == (4, 3, 2)
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0


def test_ct_volume_rejects_non_finite():
    bad = np.zeros((1, 2, 2), dtype=np.float32)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        CtVolume(bad)


def test_ct_volume_rejects_bad_spacing():
    data = np.zeros((1, 2, 2), dtype=np.float32)
    with pytest.raises(ValueError):
        CtVolume(data, (0.0, 1.0, 1.0))


@pytest.mark.parametrize("shape", [(0, 2, 2), (2, 2), (1, 1, 1, 1)])
def test_volume_rejects_bad_shapes(shape):
    with pytest.raises(ValueError):
        CtVolume(np.zeros(shape, dtype=np.float32))


def test_label_volume_value_set():
    LabelVolume(np.array([[[0, 1], [2, 0]]], dtype=np.uint8))
    with pytest.raises(ValueError):
        LabelVolume(np.array([[[0, 3]]], dtype=np.uint8))


def test_mask_volume_roles_and_binary():
    MaskVolume(np.ones((1, 1, 1), dtype=np.uint8), "tumor")
    with pytest.raises(ValueError):
        MaskVolume(np.ones((1, 1, 1), dtype=np.uint8), "nonsense")
    with pytest.raises(ValueError):
        MaskVolume(np.full((1, 1, 1), 2, dtype=np.uint8), "tumor")
