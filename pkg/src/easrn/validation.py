"""Input validation helpers shared across the package.

All image-processing entry points normalise their inputs through
:func:`as_image` so the rest of the code can assume float64 arrays of
shape (H, W, C) with C in {1, 3}.
"""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a config object or CLI invocation is invalid."""


def as_image(img, name: str = "image") -> np.ndarray:
    """Coerce ``img`` to a float64 (H, W, C) array with C in {1, 3}.

    2-D inputs are promoted to a single channel.  Values are not range
    checked here; synthesis stages legitimately produce values above 1
    before clipping.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(
            f"{name} must be (H, W) or (H, W, C) with C in {{1, 3}}, got shape {np.shape(img)}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must share a shape, got {a.shape} vs {b.shape}")


def check_unit_range(img: np.ndarray, name: str = "image", tol: float = 1e-9) -> None:
    lo, hi = float(img.min()), float(img.max())
    if lo < -tol or hi > 1.0 + tol:
        raise ValueError(f"{name} must lie in [0, 1], got range [{lo:.4g}, {hi:.4g}]")


def rng_from(seed) -> np.random.Generator:
    """Deterministic generator for an int seed or seed tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
