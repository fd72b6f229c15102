"""Camera-shake blur synthesis with saturated light streaks, and a
scale-recurrent restoration graph with verifiable losses and metrics."""

from .blur import NoiseConfig, add_noise, clip_dynamic_range, synthesize_blur, trajectory_to_flow, warp_image
from .estimators import CameraShakeBlur, EASRNDeblurrer, GaussianPyramid, LightStreakPrinter
from .losses import (LossWeights, fidelity_loss, make_reference_extractor, perceptual_tv_loss,
                     reference_edge_detector, sed_loss, total_loss, total_variation)
from .metrics import psnr, ssim
from .network import (GraphConfig, channel_plan, easrn_backward, easrn_forward, init_weights,
                      load_weights, save_weights, validate_weights, weight_plan, zero_weights)
from .pipeline import DatasetPolicy, evaluate_pairs, generate_dataset, replay_manifest, run_deblur
from .pyramid import decompose, upsample2x
from .streaks import LightSource, StreakConfig, print_light_sources, render_source_shape
from .trajectory import MotionConfig, Trajectory, generate_trajectory, rescale_trajectory
from .validation import ConfigurationError

__version__ = "0.1.0"

__all__ = [
    "CameraShakeBlur", "ConfigurationError", "DatasetPolicy", "EASRNDeblurrer",
    "GaussianPyramid", "GraphConfig", "LightSource", "LightStreakPrinter", "LossWeights",
    "MotionConfig", "NoiseConfig", "StreakConfig", "Trajectory", "add_noise", "channel_plan",
    "clip_dynamic_range", "decompose", "easrn_backward", "easrn_forward", "evaluate_pairs",
    "fidelity_loss", "generate_dataset", "generate_trajectory", "init_weights", "load_weights",
    "make_reference_extractor", "perceptual_tv_loss", "print_light_sources", "psnr",
    "reference_edge_detector", "render_source_shape", "replay_manifest", "rescale_trajectory",
    "run_deblur", "save_weights", "sed_loss", "ssim", "synthesize_blur", "total_loss",
    "total_variation", "trajectory_to_flow", "upsample2x", "validate_weights", "warp_image",
    "weight_plan", "zero_weights",
]
