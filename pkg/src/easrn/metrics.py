"""Full-reference image quality metrics.

PSNR is computed over all channels jointly against a unit dynamic
range; identical images report ``inf``.  SSIM is the standard
single-scale index with an 11x11 Gaussian window (sigma 1.5,
K1=0.01, K2=0.03), evaluated on luma for colour inputs and averaged
over valid window positions.  No claim of bit-compatibility with any
particular published evaluation script is made.
"""

from __future__ import annotations

import numpy as np

from .validation import as_image, check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_LUMA = np.array([0.299, 0.587, 0.114])


def psnr(a, b) -> float:
    """10*log10(1 / MSE) in decibels for unit-range images."""
    x, y = as_image(a), as_image(b)
    check_same_shape(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(r**2) / (2.0 * sigma**2))
    return w / w.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    out = np.lib.stride_tricks.sliding_window_view(img, win.size, axis=0) @ win
    return np.lib.stride_tricks.sliding_window_view(out, win.size, axis=1) @ win


def to_luma(img: np.ndarray) -> np.ndarray:
    arr = as_image(img)
    if arr.shape[2] == 1:
        return arr[:, :, 0]
    return arr @ _LUMA


def ssim(a, b) -> float:
    """Mean structural similarity over valid window positions."""
    x, y = as_image(a), as_image(b)
    check_same_shape(x, y)
    if min(x.shape[0], x.shape[1]) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side for ssim")
    return float(ssim_map(to_luma(x), to_luma(y)).mean())


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-window SSIM values on single-channel unit-range inputs."""
    win = _gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_x = _filter_valid(x, win)
    mu_y = _filter_valid(y, win)
    var_x = _filter_valid(x * x, win) - mu_x**2
    var_y = _filter_valid(y * y, win) - mu_y**2
    cov = _filter_valid(x * y, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return num / den
