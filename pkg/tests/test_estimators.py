import numpy as np
import numpy.testing as npt
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from easrn.estimators import CameraShakeBlur, EASRNDeblurrer, GaussianPyramid, LightStreakPrinter
from easrn.network import GraphConfig, init_weights, save_weights
from easrn.pyramid import decompose


@pytest.fixture
def img():
    return np.random.default_rng(0).random((64, 64, 3)) * 0.8


def test_estimators_clone_and_get_params(img):
    for est in (GaussianPyramid(n_levels=3),
                LightStreakPrinter(random_state=3),
                CameraShakeBlur(max_shift=10.0, random_state=4),
                EASRNDeblurrer(base_channels=2)):
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()


def test_gaussian_pyramid_transform(img):
    levels = GaussianPyramid(n_levels=3).fit(img).transform(img)
    for a, b in zip(levels, decompose(img, 3)):
        npt.assert_array_equal(a, b)


def test_streak_printer_deterministic(img):
    est = LightStreakPrinter(count_range=(1, 5), random_state=7)
    a = est.fit(img).transform(img)
    b = est.transform(img)
    assert a.tobytes() == b.tobytes()
    assert a.max() > 1.0


def test_camera_shake_blur_pair(img):
    est = CameraShakeBlur(num_samples=40, max_shift=6.0, noise_sigma=0.01, random_state=1)
    blurred, truth = est.fit(img).transform_pair(img)
    assert blurred.shape == img.shape == truth.shape
    assert 0.0 <= blurred.min() and blurred.max() <= 1.0
    npt.assert_array_equal(est.transform(img), blurred)


def test_set_params_changes_behavior(img):
    est = CameraShakeBlur(num_samples=30, max_shift=4.0, random_state=2)
    a = est.transform(img)
    b = est.set_params(max_shift=12.0).transform(img)
    assert not np.array_equal(a, b)


def test_deblurrer_zero_init_is_identity(img):
    est = EASRNDeblurrer(init="zero").fit()
    npt.assert_array_equal(est.predict(img), img)
    ys = est.predict_multiscale(img)
    assert [y.shape for y in ys] == [lv.shape for lv in decompose(img, 3)]


def test_deblurrer_requires_fit(img):
    with pytest.raises(NotFittedError):
        EASRNDeblurrer().predict(img)


def test_deblurrer_loads_weight_file(tmp_path, img):
    cfg = GraphConfig(base_channels=2)
    path = tmp_path / "toy.easrnw"
    save_weights(path, init_weights(cfg, seed=9, dtype=np.float32))
    est = EASRNDeblurrer(base_channels=2, weights_path=str(path)).fit()
    out = est.predict(img)
    assert out.shape == img.shape
    assert not np.array_equal(out, img)
