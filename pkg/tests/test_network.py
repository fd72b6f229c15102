import numpy as np
import numpy.testing as npt
import pytest

import easrn.autodiff as ad
from easrn import pyramid
from easrn.network import (FUSE_BLOCKS, GraphConfig, channel_plan, deblur_subnet, easrn_backward,
                           easrn_forward, inception_module, init_weights, load_weights,
                           res_in_res_block, save_weights, upsample_subnet, validate_weights,
                           weight_plan, zero_weights)
from easrn.validation import ConfigurationError

CFG = GraphConfig()


def conv_oracle(x, w, b=None, stride=1):
    # direct summation, independent of the im2col path
    kh, kw, cin, cout = w.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    ho = (x.shape[0] - 1) // stride + 1
    wo = (x.shape[1] - 1) // stride + 1
    y = np.zeros((ho, wo, cout))
    for i in range(ho):
        for j in range(wo):
            patch = xp[i * stride:i * stride + kh, j * stride:j * stride + kw]
            for co in range(cout):
                y[i, j, co] = np.sum(patch * w[:, :, :, co])
    if b is not None:
        y += b
    return y


def lrelu_oracle(x, slope=0.2):
    return np.where(x > 0, x, slope * x)


# ------------------------------------------------------------- primitive ops

def test_conv_identity_1x1():
    x = np.random.default_rng(0).normal(size=(6, 7, 3))
    w = np.zeros((1, 1, 3, 3))
    for c in range(3):
        w[0, 0, c, c] = 1.0
    npt.assert_array_equal(ad.conv2d(x, w).value, x)


def test_conv_ones_kernel_on_one_hot():
    x = np.zeros((7, 7, 1))
    x[3, 3, 0] = 1.0
    w = np.ones((3, 3, 1, 1))
    y = ad.conv2d(x, w).value
    expect = np.zeros((7, 7, 1))
    expect[2:5, 2:5, 0] = 1.0
    npt.assert_array_equal(y, expect)


@pytest.mark.parametrize("stride", [1, 2])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_conv_matches_direct_summation(stride, k):
    rng = np.random.default_rng(k * 10 + stride)
    x = rng.normal(size=(9, 8, 4))
    w = rng.normal(size=(k, k, 4, 5))
    b = rng.normal(size=5)
    npt.assert_allclose(ad.conv2d(x, w, b, stride).value, conv_oracle(x, w, b, stride),
                        rtol=1e-12, atol=1e-12)


def test_lrelu_values():
    assert ad.lrelu(np.array(-1.0), 0.2).value == pytest.approx(-0.2)
    x = np.array([[-2.0, 0.5]])
    npt.assert_allclose(ad.lrelu(x, 0.1).value, [[-0.2, 0.5]])


def test_deconv_hand_case_and_adjointness():
    # 1x1 input with an all-ones filter spreads the value over a 2x2 block
    x = np.array([[[2.0]]])
    w = np.ones((3, 3, 1, 1))
    npt.assert_array_equal(ad.deconv2x(x, w).value, np.full((2, 2, 1), 2.0))
    # <deconv(x, w), z> == <x, conv_stride2(z, w)> for random tensors
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 6, 3))
    w = rng.normal(size=(3, 3, 3, 4))
    z = rng.normal(size=(10, 12, 4))
    lhs = np.sum(ad.deconv2x(x, w).value * z)
    rhs = np.sum(x * ad.conv2d(z, w.transpose(0, 1, 3, 2), stride=2).value)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_deconv_doubles_dims():
    y = ad.deconv2x(np.zeros((5, 9, 2)), np.zeros((3, 3, 2, 6)))
    assert y.value.shape == (10, 18, 6)


def test_maxpool_matches_loop_oracle():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 8, 3))
    y = ad.maxpool2x(x).value
    for i in range(3):
        for j in range(4):
            for c in range(3):
                assert y[i, j, c] == x[2 * i:2 * i + 2, 2 * j:2 * j + 2, c].max()


def test_upsample_matches_pyramid_op():
    rng = np.random.default_rng(5)
    x = rng.random((7, 9, 3))
    for target in [(14, 18), (13, 17)]:
        npt.assert_allclose(ad.upsample_bilinear(x, target).value,
                            pyramid.upsample2x(x, target), atol=1e-12)


# ------------------------------------------------------------------ blocks

def rir_oracle(x, weights, prefix, slope):
    def rb(u, i):
        w1, b1 = weights[f"{prefix}.rb{i}.conv1.w"], weights[f"{prefix}.rb{i}.conv1.b"]
        w2, b2 = weights[f"{prefix}.rb{i}.conv2.w"], weights[f"{prefix}.rb{i}.conv2.b"]
        return u + conv_oracle(lrelu_oracle(conv_oracle(u, w1, b1), slope), w2, b2)
    return rb(rb(x, 1), 2)


def make_rir_weights(ch, seed):
    rng = np.random.default_rng(seed)
    weights = {}
    for i in (1, 2):
        for j in (1, 2):
            weights[f"blk.rb{i}.conv{j}.w"] = rng.normal(scale=0.3, size=(3, 3, ch, ch))
            weights[f"blk.rb{i}.conv{j}.b"] = rng.normal(scale=0.1, size=ch)
    return weights


def test_rir_zero_weights_is_identity():
    x = np.random.default_rng(6).normal(size=(8, 8, 4))
    weights = {k: np.zeros_like(v) for k, v in make_rir_weights(4, 0).items()}
    npt.assert_array_equal(res_in_res_block(x, weights, "blk").value, x)


def test_rir_zero_input_zero_bias_gives_zero():
    weights = make_rir_weights(4, 7)
    for k in list(weights):
        if k.endswith(".b"):
            weights[k] = np.zeros_like(weights[k])
    x = np.zeros((6, 6, 4))
    npt.assert_array_equal(res_in_res_block(x, weights, "blk").value, x)


def test_rir_matches_straight_line_oracle():
    weights = make_rir_weights(4, 8)
    x = np.random.default_rng(9).normal(size=(8, 8, 4))
    got = res_in_res_block(x, weights, "blk", slope=0.2).value
    npt.assert_allclose(got, rir_oracle(x, weights, "blk", 0.2), rtol=1e-11, atol=1e-12)


def test_inception_identity_branch_replicates_input():
    cfg = CFG
    c4 = cfg.encoder_channels[-1]
    branch = c4 // 4
    weights = zero_weights(cfg)
    for c in range(branch):
        weights["deblur.incep.b0.w"][0, 0, c, c] = 1.0
    x = np.random.default_rng(10).normal(size=(5, 5, c4))
    y = inception_module(x, weights, cfg).value
    npt.assert_array_equal(y[:, :, :branch], x[:, :, :branch])
    npt.assert_array_equal(y[:, :, branch:], np.zeros((5, 5, c4 - branch)))


def test_inception_shapes_at_paper_scale():
    cfg = GraphConfig(base_channels=32)
    plan = weight_plan(cfg)
    for i, k in enumerate((1, 3, 5, 7)):
        assert plan[f"deblur.incep.b{i}"] == (k, k, 256, 64)


def test_inception_matches_oracle():
    cfg = CFG
    weights = init_weights(cfg, seed=11)
    c4 = cfg.encoder_channels[-1]
    x = np.random.default_rng(12).normal(size=(6, 6, c4))
    got = inception_module(x, weights, cfg).value
    parts = [conv_oracle(x, weights[f"deblur.incep.b{i}.w"], weights[f"deblur.incep.b{i}.b"])
             for i in range(4)]
    npt.assert_allclose(got, np.concatenate(parts, axis=2), rtol=1e-11, atol=1e-12)


# ----------------------------------------------------------------- subnets

def test_deblur_subnet_zero_weights_identity():
    x = np.random.default_rng(13).random((24, 24, 3))
    y = deblur_subnet(ad.Node(x), zero_weights(CFG), CFG)
    npt.assert_array_equal(y.value, x)


def test_deblur_subnet_preserves_odd_dims():
    x = np.random.default_rng(14).random((100, 37, 3))
    y = deblur_subnet(ad.Node(x), init_weights(CFG, seed=2), CFG)
    assert y.value.shape == x.shape


def test_upsample_subnet_zero_weights_passes_next_level():
    rng = np.random.default_rng(15)
    y1 = rng.random((8, 8, 3))
    b2 = rng.random((16, 16, 3))
    out = upsample_subnet(ad.Node(y1), ad.Node(b2), zero_weights(CFG), CFG)
    npt.assert_array_equal(out.value, b2)


def test_forward_zero_weights_returns_levels():
    img = np.random.default_rng(16).random((40, 48, 3))
    ys = easrn_forward(img, zero_weights(CFG), CFG)
    for y, b in zip(ys, pyramid.decompose(img, 3)):
        npt.assert_array_equal(y, b)


def test_forward_dims_match_levels():
    img = np.random.default_rng(17).random((50, 70, 3))
    ys = easrn_forward(img, init_weights(CFG, seed=3), CFG)
    assert [y.shape for y in ys] == [lv.shape for lv in pyramid.decompose(img, 3)]


def test_forward_golden_regression():
    img_rng = np.random.default_rng(2024)
    img = img_rng.random((32, 32, 3))
    ys = easrn_forward(img, init_weights(CFG, seed=42), CFG)
    again = easrn_forward(img, init_weights(CFG, seed=42), CFG)
    for a, b in zip(ys, again):
        assert a.tobytes() == b.tobytes()
    summary = [float(ys[-1].mean()), float(ys[-1].std()), float(ys[0][3, 4, 1]), float(ys[1][10, 2, 0])]
    npt.assert_allclose(summary, [0.5080767557481708, 0.29559662045639756,
                                  0.5740762644225234, 0.5724858071882458], rtol=1e-9)


def test_backward_returns_grads_for_all_weights_and_levels():
    img = np.random.default_rng(18).random((24, 24, 3))
    weights = init_weights(CFG, seed=4)
    levels = pyramid.decompose(img, 3)
    grads = [np.zeros_like(lv) for lv in levels]
    grads[-1][5, 5, 0] = 1.0
    wgrads, lgrads = easrn_backward(img, weights, CFG, grads)
    assert set(wgrads) == set(weights)
    assert [g.shape for g in lgrads] == [lv.shape for lv in levels]
    assert any(np.abs(g).sum() > 0 for g in wgrads.values())


def test_backward_identity_routing():
    # zero weights: the graph is an identity per level, so the gradient of
    # the finest output lands on the finest level unchanged
    img = np.random.default_rng(19).random((16, 16, 3))
    levels = pyramid.decompose(img, 3)
    seed_grads = [np.zeros_like(lv) for lv in levels]
    seed_grads[-1] = np.random.default_rng(20).normal(size=levels[-1].shape)
    _, lgrads = easrn_backward(img, zero_weights(CFG), CFG, seed_grads)
    npt.assert_allclose(lgrads[-1], seed_grads[-1], atol=1e-12)


# ------------------------------------------------------------- weight store

def test_channel_plan_paper_scale():
    plan = channel_plan(GraphConfig(base_channels=32))
    assert plan["encoder_decoder_pairs"] == [32, 64, 128, 256]
    assert plan["inception_filter_sizes"] == [1, 3, 5, 7]
    assert plan["inception_branch_channels"] == 64
    assert plan["fusion_channels"] == 32


def test_weight_file_round_trip(tmp_path):
    weights = init_weights(CFG, seed=5, dtype=np.float32)
    p1, p2 = tmp_path / "a.easrnw", tmp_path / "b.easrnw"
    save_weights(p1, weights)
    loaded = load_weights(p1)
    save_weights(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()
    for name, arr in weights.items():
        npt.assert_array_equal(loaded[name], arr.astype(np.float64))
    assert p1.read_bytes()[:8] == b"EASRNW1\x00"


def test_weight_file_rejects_bad_magic(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ConfigurationError):
        load_weights(p)


def test_validate_weights_names_missing_entry():
    weights = zero_weights(CFG)
    weights.pop("deblur.stem.w")
    with pytest.raises(ConfigurationError, match="deblur.stem.w"):
        validate_weights(weights, CFG)


def test_validate_weights_names_shape_mismatch():
    weights = zero_weights(CFG)
    weights["fuse.out.w"] = np.zeros((3, 3, 2, 3))
    with pytest.raises(ConfigurationError, match="fuse.out.w"):
        validate_weights(weights, CFG)


def test_invalid_graph_config():
    with pytest.raises(ConfigurationError):
        GraphConfig(inception_sizes=(1, 2, 3, 4)).validate()
    with pytest.raises(ConfigurationError):
        GraphConfig(base_channels=0).validate()
