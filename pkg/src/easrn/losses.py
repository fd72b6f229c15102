"""Training losses: multiscale L1 fidelity, a salient-edge (ringing)
term at full resolution, and a per-scale detail term combining feature
distance with total-variation smoothing.

Edge detection and feature extraction are pluggable callables operating
on autodiff nodes, so the losses stay differentiable end to end no
matter what is plugged in.  Deterministic reference implementations are
provided: a smoothed-gradient edge detector and a small fixed-weight
conv stack standing in for a pretrained feature network.

Norms inside the losses are per-element means rather than raw sums so
the default weights keep their meaning across resolutions; the
standalone :func:`total_variation` reports the raw forward-difference
sum, which is the quantity the hand-computed examples count.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .validation import ConfigurationError, rng_from

BT601_LUMA = (0.299, 0.587, 0.114)
_GAUSS5 = None


@dataclass(frozen=True)
class LossWeights:
    """Weights of the edge, feature, and smoothing terms."""

    w_s: float = 2.4
    w_p: float = 3e-6
    w_t: float = 0.8

    def validate(self) -> None:
        if self.w_s < 0 or self.w_p < 0 or self.w_t < 0:
            raise ConfigurationError(f"loss weights must be >= 0, got {self}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


def _luma_node(x: ad.Node) -> ad.Node:
    c = x.value.shape[2]
    return ad.luma(x, BT601_LUMA if c == 3 else [1.0] * c)


# ------------------------------------------------------------------- losses

def fidelity_loss(outputs, truths) -> ad.Node:
    """Mean-per-pixel L1 distance averaged over pyramid scales."""
    if len(outputs) != len(truths) or not outputs:
        raise ValueError("outputs and truths must be equal-length, non-empty pyramids")
    total = None
    for y, g in zip(outputs, truths):
        term = ad.mean_abs(ad.sub(ad.as_node(y), ad.as_node(g)))
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, 1.0 / len(outputs))


def sed_loss(y_full, g_full, detector, w_s: float) -> ad.Node:
    """Weighted L1 distance between salient-edge maps; applied at the
    full-resolution scale only."""
    d_y = detector(ad.as_node(y_full))
    d_g = detector(ad.as_node(g_full))
    return ad.scale(ad.mean_abs(ad.sub(d_y, d_g)), w_s)


def total_variation(img) -> ad.Node:
    """Raw squared forward-difference sum, zero along the trailing row
    and column."""
    x = ad.as_node(img)
    return ad.add(ad.sum_sq(ad.forward_diff(x, 0)), ad.sum_sq(ad.forward_diff(x, 1)))


def _tv_mean(x: ad.Node) -> ad.Node:
    return ad.add(ad.mean_sq(ad.forward_diff(x, 0)), ad.mean_sq(ad.forward_diff(x, 1)))


def perceptual_tv_loss(outputs, truths, extractor, w_p: float, w_t: float) -> ad.Node:
    """Per-scale sum of squared feature distance plus total-variation
    smoothing of the outputs."""
    if len(outputs) != len(truths) or not outputs:
        raise ValueError("outputs and truths must be equal-length, non-empty pyramids")
    total = None
    for y, g in zip(outputs, truths):
        y, g = ad.as_node(y), ad.as_node(g)
        term = ad.scale(_tv_mean(y), w_t)
        if w_p != 0.0:
            feat = None
            for fy, fg in zip(extractor(y), extractor(g)):
                d = ad.mean_sq(ad.sub(fy, fg))
                feat = d if feat is None else ad.add(feat, d)
            term = ad.add(term, ad.scale(feat, w_p))
        total = term if total is None else ad.add(total, term)
    return total


def total_loss(fidelity, sed, detail) -> ad.Node:
    """Straight sum of the three terms."""
    return ad.add(ad.add(ad.as_node(fidelity), ad.as_node(sed)), ad.as_node(detail))


def evaluate_total(outputs, truths, detector, extractor, weights: LossWeights = LossWeights()) -> ad.Node:
    """Convenience composition of all three terms on a pyramid pair."""
    weights.validate()
    return total_loss(
        fidelity_loss(outputs, truths),
        sed_loss(outputs[-1], truths[-1], detector, weights.w_s),
        perceptual_tv_loss(outputs, truths, extractor, weights.w_p, weights.w_t),
    )


# --------------------------------------------------- reference edge detector

def _gauss5_kernel() -> np.ndarray:
    global _GAUSS5
    if _GAUSS5 is None:
        g = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
        _GAUSS5 = np.outer(g, g)[:, :, None, None]
    return _GAUSS5


def reference_edge_detector(img) -> ad.Node:
    """Deterministic salient-edge stand-in.

    Gaussian-smoothed central-difference gradient magnitude on luma,
    normalized to unit peak and softly gated at its 90th percentile.
    Values lie in [0, 1]; mirror-padded filtering keeps the map
    translation-equivariant to integer shifts away from borders.
    """
    x = ad.as_node(img)
    h, w, _ = x.value.shape
    pad = 3
    lum = ad.pad_mirror(_luma_node(x), pad, pad, pad, pad)
    smooth = ad.conv2d(lum, _gauss5_kernel())
    kx = np.array([[-0.5, 0.0, 0.5]])[:, :, None, None]
    gx = ad.crop2d(ad.conv2d(smooth, kx), pad, pad, h, w)
    gy = ad.crop2d(ad.conv2d(smooth, kx.transpose(1, 0, 2, 3)), pad, pad, h, w)
    mag2 = ad.add(ad.mul(gx, gx), ad.mul(gy, gy))
    if float(mag2.value.max()) <= 1e-24:
        return ad.Node(np.zeros((h, w, 1), dtype=x.value.dtype))
    mag = ad.sqrt(ad.add_const(mag2, 1e-24))
    norm = ad.div_by_scalar(mag, ad.reduce_max(mag))
    gate = ad.sigmoid(ad.scale(ad.sub_scalar(norm, ad.percentile(norm, 90.0)), 1.0 / 0.05))
    return ad.mul(norm, gate)


# ---------------------------------------------- reference feature extractor

def make_reference_extractor(seed: int = 0, widths: tuple[int, int] = (8, 16)):
    """Fixed seeded two-stage conv stack standing in for a pretrained
    feature network: full-resolution features, then pooled features at
    half resolution (shapes mimic early classifier layers at toy width).
    """
    rng = rng_from((0xFEA7, seed))  # fixed namespace so extractor streams never collide with others
    c1, c2 = widths

    def filt(kin, kout):
        return rng.normal(0.0, np.sqrt(2.0 / (9 * kin)), size=(3, 3, kin, kout))

    w11, w12 = filt(1, c1), filt(c1, c1)
    w21, w22 = filt(c1, c2), filt(c2, c2)

    def extract(img) -> list[ad.Node]:
        x = ad.as_node(img)
        lum = _luma_node(x)
        f1 = ad.lrelu(ad.conv2d(ad.lrelu(ad.conv2d(lum, w11)), w12))
        h, w, _ = f1.value.shape
        if h % 2 or w % 2:
            f1_even = ad.pad_mirror(f1, 0, h % 2, 0, w % 2)
        else:
            f1_even = f1
        pooled = ad.maxpool2x(f1_even)
        f2 = ad.lrelu(ad.conv2d(ad.lrelu(ad.conv2d(pooled, w21)), w22))
        return [f1, f2]

    return extract
