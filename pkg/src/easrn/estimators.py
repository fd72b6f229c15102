"""Scikit-learn style wrappers around the functional core.

Each estimator operates on one image at a time ((H, W) or (H, W, C)
arrays) and is a pure function of its parameters, so `get_params`,
`set_params`, and `clone` compose with the wider ecosystem.  `fit` is
stateless for the synthesis transformers; the deblurrer materialises its
weight store there.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .blur import NoiseConfig, synthesize_blur
from .network import GraphConfig, easrn_forward, init_weights, load_weights, validate_weights, zero_weights
from .pyramid import decompose
from .streaks import StreakConfig, print_light_sources
from .trajectory import MotionConfig, generate_trajectory
from .validation import as_image


class GaussianPyramid(BaseEstimator, TransformerMixin):
    """Decompose an image into its multiscale pyramid (coarsest first)."""

    def __init__(self, n_levels=3):
        self.n_levels = n_levels

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[np.ndarray]:
        return decompose(X, self.n_levels)


class LightStreakPrinter(BaseEstimator, TransformerMixin):
    """Print random saturated light sources into a sharp image."""

    def __init__(self, count_range=(2, 20), intensity_range=(1.0, 10.0),
                 shape_size=17, random_state=0):
        self.count_range = count_range
        self.intensity_range = intensity_range
        self.shape_size = shape_size
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        cfg = StreakConfig(tuple(self.count_range), tuple(self.intensity_range),
                           self.shape_size, self.random_state)
        return print_light_sources(X, cfg)


class CameraShakeBlur(BaseEstimator, TransformerMixin):
    """Blur an image along a seeded random camera trajectory."""

    def __init__(self, num_samples=100, max_shift=30.0, step_sigma=0.5,
                 centripetal_gain=0.1, impulse_prob=0.1, rotation_per_sample=0.0,
                 noise_sigma=0.0, random_state=0):
        self.num_samples = num_samples
        self.max_shift = max_shift
        self.step_sigma = step_sigma
        self.centripetal_gain = centripetal_gain
        self.impulse_prob = impulse_prob
        self.rotation_per_sample = rotation_per_sample
        self.noise_sigma = noise_sigma
        self.random_state = random_state

    def _trajectory(self):
        return generate_trajectory(MotionConfig(
            num_samples=self.num_samples, max_shift=self.max_shift,
            step_sigma=self.step_sigma, centripetal_gain=self.centripetal_gain,
            impulse_prob=self.impulse_prob, seed=self.random_state))

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        return self.transform_pair(X)[0]

    def transform_pair(self, X) -> tuple[np.ndarray, np.ndarray]:
        """(blurred, registered ground truth) for a sharp input."""
        noise = NoiseConfig(self.noise_sigma, seed=(self.random_state, 1))
        return synthesize_blur(as_image(X), self._trajectory(),
                               self.rotation_per_sample, noise)


class EASRNDeblurrer(BaseEstimator, TransformerMixin):
    """Run the scale-recurrent restoration graph over an image.

    Weights come from a weight file when ``weights_path`` is set,
    otherwise from a seeded initialization ("zero" gives the identity
    graph, "random" a seeded draw).
    """

    def __init__(self, n_scales=3, base_channels=4, lrelu_slope=0.2,
                 weights_path=None, init="zero", random_state=0):
        self.n_scales = n_scales
        self.base_channels = base_channels
        self.lrelu_slope = lrelu_slope
        self.weights_path = weights_path
        self.init = init
        self.random_state = random_state

    def _config(self) -> GraphConfig:
        return GraphConfig(base_channels=self.base_channels, n_scales=self.n_scales,
                           lrelu_slope=self.lrelu_slope)

    def fit(self, X=None, y=None):
        config = self._config()
        if self.weights_path is not None:
            weights = load_weights(self.weights_path)
        elif self.init == "zero":
            weights = zero_weights(config)
        else:
            weights = init_weights(config, seed=self.random_state)
        validate_weights(weights, config)
        self.config_ = config
        self.weights_ = weights
        return self

    def predict(self, X) -> np.ndarray:
        return self.predict_multiscale(X)[-1]

    def predict_multiscale(self, X) -> list[np.ndarray]:
        check_is_fitted(self, ["weights_", "config_"])
        return easrn_forward(X, self.weights_, self.config_)

    def transform(self, X) -> np.ndarray:
        return self.predict(X)
