"""Camera-shake blur synthesis.

A sharp frame is blurred by sweeping it along a trajectory: each time
sample becomes a per-pixel flow field (translation plus optional
in-plane roll about the image centre), the frame is backward-warped with
bilinear subpixel interpolation, and the warped series is averaged.
Gaussian noise is added after averaging and the result is clipped to the
unit dynamic range.  The matching ground truth is the sharp frame warped
by the mean displacement, which removes the centre offset between the
pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory
from .validation import ConfigurationError, as_image, check_same_shape, rng_from


@dataclass(frozen=True)
class NoiseConfig:
    """Zero-mean Gaussian pixel noise; sigma in intensity units."""

    sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.sigma < 0:
            raise ConfigurationError(f"noise sigma must be >= 0, got {self.sigma}")


def trajectory_to_flow(sample, rotation_deg: float, dims) -> np.ndarray:
    """Per-pixel (u, v) displacement for one trajectory sample.

    Pure translation gives a spatially constant field equal to the
    sample.  A nonzero roll composes the rigid rotation about the image
    centre with the translation.
    """
    h, w = int(dims[0]), int(dims[1])
    if h < 1 or w < 1:
        raise ValueError(f"flow dims must be >= 1, got {dims}")
    dx, dy = float(sample[0]), float(sample[1])
    if rotation_deg == 0.0:
        flow = np.empty((h, w, 2))
        flow[:, :, 0] = dx
        flow[:, :, 1] = dy
        return flow
    theta = np.deg2rad(rotation_deg)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rx, ry = xs - cx, ys - cy
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    flow = np.empty((h, w, 2))
    flow[:, :, 0] = (cos_t * rx - sin_t * ry) + cx + dx - xs
    flow[:, :, 1] = (sin_t * rx + cos_t * ry) + cy + dy - ys
    return flow


def warp_image(img, flow: np.ndarray) -> np.ndarray:
    """Backward-warp: output pixel p samples the input at p + flow(p).

    Bilinear interpolation with sampling coordinates clamped to the
    image, which replicates the nearest edge pixel for out-of-bounds
    samples.
    """
    arr = as_image(img)
    h, w, _ = arr.shape
    if flow.shape[:2] != (h, w) or flow.shape[-1] != 2:
        raise ValueError(f"flow shape {flow.shape} does not match image {arr.shape}")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cx = np.clip(xs + flow[:, :, 0], 0.0, w - 1.0)
    cy = np.clip(ys + flow[:, :, 1], 0.0, h - 1.0)
    x0 = np.clip(np.floor(cx).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(cy).astype(np.intp), 0, max(h - 2, 0))
    fx = (cx - x0)[:, :, None]
    fy = (cy - y0)[:, :, None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = arr[y0, x0] * (1 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1 - fx) + arr[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def accumulate_frames(sharp, traj: Trajectory, rotation_per_sample: float = 0.0) -> np.ndarray:
    """Average the warped frame series (pre-noise, pre-clip)."""
    arr = as_image(sharp, "sharp")
    if len(traj) < 1:
        raise ValueError("trajectory must be non-empty")
    h, w, _ = arr.shape
    acc = np.zeros_like(arr)
    for t, sample in enumerate(traj.samples):
        flow = trajectory_to_flow(sample, rotation_per_sample * t, (h, w))
        acc += warp_image(arr, flow)
    return acc / len(traj)


def registration_flow(traj: Trajectory, rotation_per_sample: float, dims) -> np.ndarray:
    """Flow of the mean displacement (and mean roll), used to register
    the sharp frame onto the blurred frame's centre."""
    mean_dx, mean_dy = traj.mean_displacement
    mean_rot = rotation_per_sample * (len(traj) - 1) / 2.0
    return trajectory_to_flow((mean_dx, mean_dy), mean_rot, dims)


def add_noise(img, noise: NoiseConfig) -> np.ndarray:
    """i.i.d. zero-mean Gaussian noise per pixel per channel, seeded."""
    noise.validate()
    arr = as_image(img)
    if noise.sigma == 0.0:
        return arr.copy()
    rng = rng_from(noise.seed)
    return arr + rng.normal(0.0, noise.sigma, size=arr.shape)


def clip_dynamic_range(img) -> np.ndarray:
    """Clamp to the unit dynamic range [0, 1]."""
    return np.clip(as_image(img), 0.0, 1.0)


def synthesize_blur(sharp, traj: Trajectory, rotation_per_sample: float = 0.0,
                    noise: NoiseConfig = NoiseConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Full pipeline: warp-average the trajectory, add noise, clip, and
    register the sharp frame by the mean displacement.

    Returns (blurred, registered_sharp), both clipped to [0, 1].
    """
    arr = as_image(sharp, "sharp")
    blurred = clip_dynamic_range(add_noise(accumulate_frames(arr, traj, rotation_per_sample), noise))
    registered = clip_dynamic_range(
        warp_image(arr, registration_flow(traj, rotation_per_sample, arr.shape[:2])))
    check_same_shape(blurred, registered)
    return blurred, registered
