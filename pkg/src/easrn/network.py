"""The scale-recurrent deblurring graph.

Two weight-shared subnets drive a coarse-to-fine recursion over a
Gaussian pyramid of the blurred image: a deblurring subnet (encoder with
max-pool downsampling and residual-in-residual blocks, an inception
bottleneck with 1/3/5/7 filters, a mirrored deconvolution decoder with
additive skip connections, and a global input-to-output residual) and a
fusion subnet that merges the upsampled coarse result with the
next-finer blurred level.  Both subnets are built from the autodiff ops
in :mod:`easrn.autodiff`, so forward evaluation and reverse-mode
gradients share one code path.

With all-zero weights every residual branch vanishes and the recursion
returns each pyramid level unchanged, which is the anchor for the
identity tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import pyramid
from .validation import ConfigurationError, as_image, rng_from

WEIGHT_MAGIC = b"EASRNW1\x00"
ENC_MULTIPLIERS = (1, 2, 4, 8)
FUSE_BLOCKS = 3


@dataclass(frozen=True)
class GraphConfig:
    """Width and depth of the graph; base_channels=32 is full scale,
    the small default keeps tests fast."""

    base_channels: int = 4
    n_scales: int = 3
    lrelu_slope: float = 0.2
    inception_sizes: tuple[int, ...] = (1, 3, 5, 7)
    image_channels: int = 3

    def validate(self) -> None:
        if self.base_channels < 1:
            raise ConfigurationError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.n_scales < 1:
            raise ConfigurationError(f"n_scales must be >= 1, got {self.n_scales}")
        if any(k % 2 == 0 for k in self.inception_sizes):
            raise ConfigurationError(f"inception filter sizes must be odd, got {self.inception_sizes}")
        bottleneck = self.base_channels * ENC_MULTIPLIERS[-1]
        if bottleneck % len(self.inception_sizes):
            raise ConfigurationError(
                f"bottleneck width {bottleneck} not divisible into {len(self.inception_sizes)} branches")

    @property
    def encoder_channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels * m for m in ENC_MULTIPLIERS)


# ------------------------------------------------------------------ weight plan

def _rir_layers(prefix: str, ch: int) -> dict[str, tuple]:
    plan = {}
    for rb in (1, 2):
        for cv in (1, 2):
            plan[f"{prefix}.rb{rb}.conv{cv}"] = (3, 3, ch, ch)
    return plan


def weight_plan(config: GraphConfig) -> dict[str, tuple]:
    """Mapping of conv-layer name to filter shape (biases are implied:
    every layer "name" owns arrays "name.w" and "name.b")."""
    config.validate()
    c1, c2, c3, c4 = config.encoder_channels
    img = config.image_channels
    plan: dict[str, tuple] = {"deblur.stem": (3, 3, img, c1)}
    plan.update(_rir_layers("deblur.enc1", c1))
    plan["deblur.down1"] = (3, 3, c1, c2)
    plan.update(_rir_layers("deblur.enc2", c2))
    plan["deblur.down2"] = (3, 3, c2, c3)
    plan.update(_rir_layers("deblur.enc3", c3))
    plan["deblur.down3"] = (3, 3, c3, c4)
    plan.update(_rir_layers("deblur.enc4", c4))
    branch = c4 // len(config.inception_sizes)
    for i, k in enumerate(config.inception_sizes):
        plan[f"deblur.incep.b{i}"] = (k, k, c4, branch)
    plan["deblur.up3"] = (3, 3, c4, c3)
    plan.update(_rir_layers("deblur.dec3", c3))
    plan["deblur.up2"] = (3, 3, c3, c2)
    plan.update(_rir_layers("deblur.dec2", c2))
    plan["deblur.up1"] = (3, 3, c2, c1)
    plan.update(_rir_layers("deblur.dec1", c1))
    plan["deblur.out"] = (3, 3, c1, img)
    plan["fuse.in"] = (3, 3, 2 * img, c1)
    for i in range(1, FUSE_BLOCKS + 1):
        plan.update(_rir_layers(f"fuse.rir{i}", c1))
    plan["fuse.out"] = (3, 3, c1, img)
    return plan


def channel_plan(config: GraphConfig) -> dict:
    """Width report: encoder/decoder pair widths, inception branches,
    fusion width, and total parameter count."""
    plan = weight_plan(config)
    n_params = sum(int(np.prod(s)) + s[3] for s in plan.values())
    return {
        "encoder_decoder_pairs": list(config.encoder_channels),
        "inception_filter_sizes": list(config.inception_sizes),
        "inception_branch_channels": config.encoder_channels[-1] // len(config.inception_sizes),
        "fusion_channels": config.base_channels,
        "parameter_count": n_params,
    }


def init_weights(config: GraphConfig, seed: int = 0, dtype=np.float64,
                 gain: float = 0.25) -> dict[str, np.ndarray]:
    """Seeded He-style initialization, damped by ``gain`` so the nested
    residual blocks keep activations bounded (test fixtures; training is
    out of scope).  Biases start at zero."""
    rng = rng_from(seed)
    weights = {}
    for name, shape in weight_plan(config).items():
        fan_in = shape[0] * shape[1] * shape[2]
        std = gain * np.sqrt(2.0 / fan_in)
        weights[name + ".w"] = rng.normal(0.0, std, size=shape).astype(dtype)
        weights[name + ".b"] = np.zeros(shape[3], dtype=dtype)
    return weights


def zero_weights(config: GraphConfig, dtype=np.float64) -> dict[str, np.ndarray]:
    weights = {}
    for name, shape in weight_plan(config).items():
        weights[name + ".w"] = np.zeros(shape, dtype=dtype)
        weights[name + ".b"] = np.zeros(shape[3], dtype=dtype)
    return weights


def validate_weights(weights: dict, config: GraphConfig) -> None:
    """Check the store holds exactly the planned entries with exact shapes."""
    plan = weight_plan(config)
    expected = {}
    for name, shape in plan.items():
        expected[name + ".w"] = shape
        expected[name + ".b"] = (shape[3],)
    for name, shape in expected.items():
        if name not in weights:
            raise ConfigurationError(f"missing weight entry '{name}'")
        got = tuple(weights[name].shape)
        if got != shape:
            raise ConfigurationError(f"weight entry '{name}' has shape {got}, expected {shape}")
    extra = set(weights) - set(expected)
    if extra:
        raise ConfigurationError(f"unexpected weight entries: {sorted(extra)}")


# ------------------------------------------------------------------- weight file

def save_weights(path, weights: dict) -> None:
    """Little-endian binary store; float32 payload, bit-exact to reload."""
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<I", len(weights)))
        for name in sorted(weights):
            arr = np.ascontiguousarray(weights[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_weights(path, dtype=np.float64) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != WEIGHT_MAGIC:
        raise ConfigurationError(f"{path} is not a weight file (bad magic)")
    off = 8
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    weights = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        weights[name] = arr.astype(dtype)
    if off != len(data):
        raise ConfigurationError(f"{path} has {len(data) - off} trailing bytes")
    return weights


# ------------------------------------------------------------------------ blocks

def _params(weights: dict, name: str):
    return ad.as_node(weights[name + ".w"]), ad.as_node(weights[name + ".b"])


def res_in_res_block(x, weights: dict, prefix: str, slope: float = 0.2):
    """Two chained residual blocks RB(u) = u + conv(lrelu(conv(u))).

    The short skip around the pair is the identity path the nested
    skips already carry end to end (the input reaches the output as an
    untouched additive term), so zero weights give an exact identity.
    """
    x = ad.as_node(x)

    def resblock(u, rb):
        w1, b1 = _params(weights, f"{prefix}.rb{rb}.conv1")
        w2, b2 = _params(weights, f"{prefix}.rb{rb}.conv2")
        return ad.add(u, ad.conv2d(ad.lrelu(ad.conv2d(u, w1, b1), slope), w2, b2))

    return resblock(resblock(x, 1), 2)


def inception_module(x, weights: dict, config: GraphConfig):
    """Parallel 1/3/5/7 convolutions, channel-concatenated back to the
    bottleneck width (no activation; the neighbours carry it)."""
    x = ad.as_node(x)
    branches = []
    for i in range(len(config.inception_sizes)):
        w, b = _params(weights, f"deblur.incep.b{i}")
        branches.append(ad.conv2d(x, w, b))
    return ad.concat_channels(*branches)


def deblur_subnet(x, weights: dict, config: GraphConfig):
    """Encoder-decoder restorer; output = input + residual branch."""
    x = ad.as_node(x)
    slope = config.lrelu_slope
    h, w, _ = x.value.shape
    pad_h = (-h) % 8
    pad_w = (-w) % 8
    xp = ad.pad_mirror(x, 0, pad_h, 0, pad_w) if pad_h or pad_w else x

    def down(u, name):
        wgt, b = _params(weights, name)
        return ad.lrelu(ad.conv2d(ad.maxpool2x(u), wgt, b), slope)

    def up(u, name):
        wgt, b = _params(weights, name)
        return ad.lrelu(ad.deconv2x(u, wgt, b), slope)

    stem_w, stem_b = _params(weights, "deblur.stem")
    e1 = res_in_res_block(ad.lrelu(ad.conv2d(xp, stem_w, stem_b), slope), weights, "deblur.enc1", slope)
    e2 = res_in_res_block(down(e1, "deblur.down1"), weights, "deblur.enc2", slope)
    e3 = res_in_res_block(down(e2, "deblur.down2"), weights, "deblur.enc3", slope)
    e4 = res_in_res_block(down(e3, "deblur.down3"), weights, "deblur.enc4", slope)
    mid = inception_module(e4, weights, config)
    d3 = res_in_res_block(ad.add(up(mid, "deblur.up3"), e3), weights, "deblur.dec3", slope)
    d2 = res_in_res_block(ad.add(up(d3, "deblur.up2"), e2), weights, "deblur.dec2", slope)
    d1 = res_in_res_block(ad.add(up(d2, "deblur.up1"), e1), weights, "deblur.dec1", slope)
    out_w, out_b = _params(weights, "deblur.out")
    residual = ad.conv2d(d1, out_w, out_b)
    if pad_h or pad_w:
        residual = ad.crop2d(residual, 0, 0, h, w)
    return ad.add(x, residual)


def upsample_subnet(y_coarse, b_next, weights: dict, config: GraphConfig):
    """Fuse the upsampled coarse result with the next blurred level.

    The residual connection comes from the blurred level itself, so the
    zero-weight graph hands each pyramid level through unchanged and the
    whole recursion is exactly the identity.
    """
    y_coarse = ad.as_node(y_coarse)
    b_next = ad.as_node(b_next)
    slope = config.lrelu_slope
    u = ad.upsample_bilinear(y_coarse, b_next.value.shape[:2])
    in_w, in_b = _params(weights, "fuse.in")
    h = ad.lrelu(ad.conv2d(ad.concat_channels(u, b_next), in_w, in_b), slope)
    for i in range(1, FUSE_BLOCKS + 1):
        h = res_in_res_block(h, weights, f"fuse.rir{i}", slope)
    out_w, out_b = _params(weights, "fuse.out")
    return ad.add(b_next, ad.conv2d(h, out_w, out_b))


# -------------------------------------------------------------------- recursion

def forward_nodes(levels, weights: dict, config: GraphConfig):
    """Coarse-to-fine recursion over pyramid levels (autodiff nodes in,
    nodes out); the fusion subnet is omitted at the first scale.

    Returns (per-scale subnet inputs x_i, per-scale outputs y_i).
    """
    inputs, outputs = [], []
    x = ad.as_node(levels[0])
    for i, level in enumerate(levels):
        if i > 0:
            x = upsample_subnet(outputs[-1], level, weights, config)
        inputs.append(x)
        outputs.append(deblur_subnet(x, weights, config))
    return inputs, outputs


def easrn_forward(blurred, weights: dict, config: GraphConfig = GraphConfig()) -> list[np.ndarray]:
    """Decompose, restore coarse to fine, and return every scale's
    output; the last entry is the full-resolution result."""
    validate_weights(weights, config)
    arr = as_image(blurred)
    if arr.shape[2] != config.image_channels:
        raise ConfigurationError(
            f"graph is configured for {config.image_channels} channels, image has {arr.shape[2]}")
    levels = pyramid.decompose(arr, config.n_scales)
    _, outputs = forward_nodes([ad.Node(lv) for lv in levels], weights, config)
    return [y.value for y in outputs]


def easrn_backward(blurred, weights: dict, config: GraphConfig,
                   output_grads: list[np.ndarray]):
    """Reverse-mode sweep seeded with one upstream gradient per scale.

    Returns (weight gradients keyed like the store, gradients of the
    pyramid levels coarsest first).  Pyramid decomposition itself sits
    outside the differentiated graph; the levels are its leaves.
    """
    validate_weights(weights, config)
    arr = as_image(blurred)
    level_nodes = [ad.Node(lv) for lv in pyramid.decompose(arr, config.n_scales)]
    param_nodes = {name: ad.Node(w) for name, w in weights.items()}
    _, outputs = forward_nodes(level_nodes, param_nodes, config)
    if len(output_grads) != len(outputs):
        raise ValueError(f"need {len(outputs)} output gradients, got {len(output_grads)}")
    total = None
    for y, g in zip(outputs, output_grads):
        term = ad.reduce_sum(ad.mul(y, ad.Node(np.asarray(g, dtype=y.value.dtype))))
        total = term if total is None else ad.add(total, term)
    ad.backprop(total)
    weight_grads = {name: (node.grad if node.grad is not None else np.zeros_like(node.value))
                    for name, node in param_nodes.items()}
    level_grads = [(node.grad if node.grad is not None else np.zeros_like(node.value))
                   for node in level_nodes]
    return weight_grads, level_grads
