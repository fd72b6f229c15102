"""Saturated light sources printed into sharp frames before blurring.

Light sources take random shapes produced by the same random-walk
trajectory generator used for camera shake, rasterized onto a small
patch with bilinear splatting and normalized to unit peak.  Each source
is composited additively with per-channel intensities of 1 to 10 times
the unit dynamic range, so the later clipping step reproduces the
saturation cutoff of an overexposed sensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trajectory import MotionConfig, Trajectory, generate_trajectory, rescale_trajectory
from .validation import ConfigurationError, as_image, rng_from

SHAPE_WALK_SAMPLES = 64
SHAPE_WALK_SIGMA = 1.0


@dataclass(frozen=True)
class StreakConfig:
    count_range: tuple[int, int] = (2, 20)
    intensity_range: tuple[float, float] = (1.0, 10.0)
    shape_size: int = 17
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.count_range
        if lo < 0 or hi < lo:
            raise ConfigurationError(f"count_range must be 0 <= lo <= hi, got {self.count_range}")
        ilo, ihi = self.intensity_range
        if ilo < 1.0 or ihi < ilo:
            raise ConfigurationError(f"intensity_range must be 1 <= lo <= hi, got {self.intensity_range}")
        if self.shape_size < 3:
            raise ConfigurationError(f"shape_size must be >= 3, got {self.shape_size}")


@dataclass(frozen=True)
class LightSource:
    """One renderable source: unit-peak patch, per-channel gains, anchor."""

    patch: np.ndarray
    intensities: np.ndarray
    position: tuple[int, int]  # top-left (y, x)
    shape_seed: int | None = field(default=None, compare=False)


def render_source_shape(traj: Trajectory, size: int) -> np.ndarray:
    """Rasterize a trajectory into a size x size unit-peak patch.

    The trajectory is rescaled so its splat footprint stays inside the
    patch, splatted bilinearly about the patch centre, and divided by
    its peak.
    """
    if size < 3:
        raise ValueError(f"patch size must be >= 3, got {size}")
    bound = (size - 1) / 2.0 - 1.0
    traj = rescale_trajectory(traj, bound)
    c = (size - 1) / 2.0
    patch = np.zeros((size, size))
    xs = c + traj.samples[:, 0]
    ys = c + traj.samples[:, 1]
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx, fy = xs - x0, ys - y0
    np.add.at(patch, (y0, x0), (1 - fx) * (1 - fy))
    np.add.at(patch, (y0, x0 + 1), fx * (1 - fy))
    np.add.at(patch, (y0 + 1, x0), (1 - fx) * fy)
    np.add.at(patch, (y0 + 1, x0 + 1), fx * fy)
    return patch / patch.max()


def sample_light_sources(cfg: StreakConfig, dims, channels: int = 3,
                         rng: np.random.Generator | None = None) -> list[LightSource]:
    """Draw k ~ Uniform(count_range) sources with independent per-channel
    intensities and uniform-random anchor positions."""
    cfg.validate()
    h, w = int(dims[0]), int(dims[1])
    s = cfg.shape_size
    if h < s or w < s:
        raise ValueError(f"image {h}x{w} cannot hold a {s}x{s} light source")
    if rng is None:
        rng = rng_from(cfg.seed)
    k = int(rng.integers(cfg.count_range[0], cfg.count_range[1] + 1))
    sources = []
    for _ in range(k):
        shape_seed = int(rng.integers(0, 2**63))
        pos = (int(rng.integers(0, h - s + 1)), int(rng.integers(0, w - s + 1)))
        gains = rng.uniform(cfg.intensity_range[0], cfg.intensity_range[1], size=channels)
        sources.append(LightSource(render_shape_for_seed(shape_seed, s), gains, pos, shape_seed))
    return sources


def render_shape_for_seed(shape_seed: int, size: int) -> np.ndarray:
    """Deterministic patch for a recorded shape seed (manifest replay)."""
    walk = MotionConfig(num_samples=SHAPE_WALK_SAMPLES, max_shift=(size - 1) / 2.0 - 1.0,
                        step_sigma=SHAPE_WALK_SIGMA, seed=shape_seed)
    return render_source_shape(generate_trajectory(walk), size)


def composite_sources(img, sources: list[LightSource]) -> np.ndarray:
    """Additively print sources; output may exceed 1 until clipping."""
    out = as_image(img).copy()
    for src in sources:
        y, x = src.position
        s = src.patch.shape[0]
        out[y:y + s, x:x + s, :] += src.patch[:, :, None] * np.asarray(src.intensities)[None, None, :]
    return out


def print_light_sources(sharp, cfg: StreakConfig) -> np.ndarray:
    """Sample and composite sources into a sharp frame in one call."""
    arr = as_image(sharp, "sharp")
    sources = sample_light_sources(cfg, arr.shape[:2], channels=arr.shape[2])
    return composite_sources(arr, sources)
