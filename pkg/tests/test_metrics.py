import numpy as np
import pytest

from easrn.metrics import psnr, ssim, to_luma


def ssim_scalar_oracle(x, y):
    # straight-line per-window implementation with explicit loops
    size, sigma = 11, 1.5
    r = np.arange(size) - 5.0
    w1 = np.exp(-(r**2) / (2 * sigma**2))
    w1 /= w1.sum()
    w2 = np.outer(w1, w1)
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size]
            py = y[i:i + size, j:j + size]
            mx = (w2 * px).sum()
            my = (w2 * py).sum()
            vx = (w2 * px * px).sum() - mx**2
            vy = (w2 * py * py).sum() - my**2
            cxy = (w2 * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2))
                        / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def mse_loop_oracle(a, b):
    total = 0.0
    for idx in np.ndindex(a.shape):
        total += (a[idx] - b[idx]) ** 2
    return total / a.size


def test_psnr_identical_is_inf():
    img = np.random.default_rng(0).random((16, 16, 3))
    assert psnr(img, img.copy()) == float("inf")


def test_psnr_uniform_offset_is_20db():
    a = np.full((32, 32, 3), 0.5)
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_double_loop_mse():
    rng = np.random.default_rng(1)
    a, b = rng.random((12, 14, 3)), rng.random((12, 14, 3))
    assert psnr(a, b) == pytest.approx(10 * np.log10(1 / mse_loop_oracle(a, b)), rel=1e-12)


def test_psnr_strictly_decreases_with_noise():
    rng = np.random.default_rng(2)
    img = rng.random((24, 24, 3)) * 0.5 + 0.25
    noise = rng.normal(size=img.shape)
    values = [psnr(img, np.clip(img + amp * noise, 0, 1)) for amp in (0.01, 0.02, 0.05, 0.1)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_ssim_identical_is_exactly_one():
    img = np.random.default_rng(3).random((20, 20, 3))
    assert ssim(img, img.copy()) == 1.0


def test_ssim_matches_scalar_oracle():
    rng = np.random.default_rng(4)
    a, b = rng.random((16, 18, 1)), rng.random((16, 18, 1))
    assert ssim(a, b) == pytest.approx(ssim_scalar_oracle(a[:, :, 0], b[:, :, 0]), rel=1e-12)


def test_ssim_inverted_binary_strongly_negative_on_texture():
    rng = np.random.default_rng(5)
    a = (rng.random((24, 24, 1)) > 0.5).astype(float)
    b = 1.0 - a
    score = ssim(a, b)
    assert score == pytest.approx(ssim_scalar_oracle(a[:, :, 0], b[:, :, 0]), rel=1e-12)
    assert score < -0.5  # anti-correlated structure
    assert -1.0 <= score <= 1.0


@pytest.mark.parametrize("seed", range(10))
def test_metric_symmetry(seed):
    rng = np.random.default_rng(seed + 100)
    a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
    assert psnr(a, b) == psnr(b, a)
    assert ssim(a, b) == ssim(b, a)


def test_luma_weights():
    img = np.zeros((2, 2, 3))
    img[0, 0] = [1.0, 0.0, 0.0]
    img[0, 1] = [0.0, 1.0, 0.0]
    img[1, 0] = [0.0, 0.0, 1.0]
    lum = to_luma(img)
    assert lum[0, 0] == pytest.approx(0.299)
    assert lum[0, 1] == pytest.approx(0.587)
    assert lum[1, 0] == pytest.approx(0.114)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))
    with pytest.raises(ValueError):
        ssim(np.zeros((16, 16, 1)), np.zeros((16, 18, 1)))
