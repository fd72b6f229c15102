"""Gaussian pyramid decomposition and bilinear upsampling.

Levels are ordered coarsest to finest; the finest level is the source
image itself.  Each coarser level is the next-finer level filtered with
the separable 5-tap binomial kernel [1, 4, 6, 4, 1]/16 (reflect-101
borders) and decimated by 2, so level dims follow the exact ceil chain
ceil(source / 2**k) and the coarse-to-fine recursion never needs
cropping.
"""

from __future__ import annotations

import numpy as np

from .validation import ConfigurationError, as_image

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _binomial_filter_axis(img: np.ndarray, axis: int) -> np.ndarray:
    padded = np.pad(img, [(2, 2) if a == axis else (0, 0) for a in range(img.ndim)], mode="reflect")
    out = np.zeros_like(img)
    for i, w in enumerate(BINOMIAL5):
        sl = [slice(None)] * img.ndim
        sl[axis] = slice(i, i + img.shape[axis])
        out += w * padded[tuple(sl)]
    return out


def downsample2x(img: np.ndarray) -> np.ndarray:
    """Smooth-and-decimate one octave; output dims are ceil(input / 2)."""
    smoothed = _binomial_filter_axis(_binomial_filter_axis(img, 0), 1)
    return smoothed[::2, ::2]


def decompose(img, n_levels: int) -> list[np.ndarray]:
    """Build the n-level pyramid, coarsest first."""
    arr = as_image(img)
    if int(n_levels) != n_levels or n_levels < 1:
        raise ConfigurationError(f"n_levels must be an integer >= 1, got {n_levels}")
    min_dim = 2 ** (n_levels - 1)
    if arr.shape[0] < min_dim or arr.shape[1] < min_dim:
        raise ConfigurationError(
            f"image {arr.shape[:2]} too small for {n_levels} levels (needs dims >= {min_dim})")
    levels = [arr]
    for _ in range(n_levels - 1):
        levels.append(downsample2x(levels[-1]))
    return levels[::-1]


def linear_coeffs(n_in: int, n_out: int):
    """Half-pixel bilinear resampling coefficients for one axis.

    Returns (i0, i1, frac) arrays of length n_out so that
    out[j] = (1 - frac[j]) * in[i0[j]] + frac[j] * in[i1[j]].
    """
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.clip(np.floor(src).astype(np.intp), 0, max(n_in - 2, 0))
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def upsample2x(img, out_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Bilinear 2x enlargement.

    ``out_shape`` pins the output to the next pyramid level's dims when
    the ceil chain makes them odd; it must satisfy ceil(out / 2) == in.
    """
    arr = as_image(img)
    h, w, _ = arr.shape
    if out_shape is None:
        out_shape = (2 * h, 2 * w)
    oh, ow = int(out_shape[0]), int(out_shape[1])
    if -(-oh // 2) != h or -(-ow // 2) != w:
        raise ValueError(f"target {out_shape} is not one octave above {arr.shape[:2]}")
    y0, y1, fy = linear_coeffs(h, oh)
    x0, x1, fx = linear_coeffs(w, ow)
    rows = arr[y0] * (1 - fy)[:, None, None] + arr[y1] * fy[:, None, None]
    return rows[:, x0] * (1 - fx)[None, :, None] + rows[:, x1] * fx[None, :, None]
