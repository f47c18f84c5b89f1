import math

import numpy as np
import pytest
from scipy.signal import correlate

from djscc.metrics import (PSNR_CAP_DB, MetricConfig, gaussian_window, ms_ssim, ms_ssim_value, psnr,
                           psnr_from_mse)
from djscc.ndgrad import Tape, Tensor, backward, ops
from djscc.ndgrad.tensor import ShapeError
from oracles import numerical_grad, rel_error

WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])


def reference_ms_ssim(x, y, peak=1.0):
    """Straight numpy/scipy evaluation for one [C, H, W] pair."""
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    r = np.arange(11) - 5.0
    g = np.exp(-r ** 2 / 4.5)
    win = np.outer(g, g) / g.sum() ** 2
    n = 1
    while n < 5 and min(x.shape[1:]) >= 11 * 2 ** n:
        n += 1
    w = WEIGHTS[:n] / WEIGHTS[:n].sum()
    per_channel = []
    for ch in range(x.shape[0]):
        a, b = x[ch].astype(np.float64), y[ch].astype(np.float64)
        value = 1.0
        for s in range(n):
            f = lambda img: correlate(img, win, mode="valid", method="direct")
            ma, mb = f(a), f(b)
            va, vb, cov = f(a * a) - ma ** 2, f(b * b) - mb ** 2, f(a * b) - ma * mb
            cs = np.mean((2 * cov + c2) / (va + vb + c2))
            lcs = np.mean((2 * ma * mb + c1) / (ma ** 2 + mb ** 2 + c1) * (2 * cov + c2) / (va + vb + c2))
            term = lcs if s == n - 1 else cs
            value *= max(term, 0.0) ** w[s]
            hh, ww = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
            a = a[:hh, :ww].reshape(hh // 2, 2, ww // 2, 2).mean(axis=(1, 3))
            b = b[:hh, :ww].reshape(hh // 2, 2, ww // 2, 2).mean(axis=(1, 3))
        per_channel.append(value)
    return float(np.mean(per_channel))


# ------------------------------------------------------------------ PSNR

def test_psnr_identical_is_capped():
    x = np.random.default_rng(0).random((3, 8, 8))
    assert psnr(x, x) == PSNR_CAP_DB


def test_psnr_hand_case():
    x = np.zeros((1, 4, 4))
    assert psnr(x, x + 0.1) == pytest.approx(20.0, abs=1e-12)
    assert psnr(x, x + 0.01) == pytest.approx(40.0, abs=1e-12)


def test_psnr_hand_case_exact_power_of_ten():
    x = np.zeros((2, 2))
    y = np.array([[1.0, 0.0], [0.0, 0.0]])      # mse = 0.25
    assert psnr(x, y) == 10 * math.log10(4.0)


def test_psnr_batched_and_peak():
    x = np.zeros((2, 1, 2, 2))
    y = np.stack([np.full((1, 2, 2), 0.1), np.full((1, 2, 2), 1.0)])
    np.testing.assert_allclose(psnr(x, y), [20.0, 0.0], atol=1e-12)
    assert psnr(np.zeros(4), np.full(4, 25.5), peak=255.0) == pytest.approx(20.0)


def test_psnr_from_mse():
    assert psnr_from_mse(0.01) == pytest.approx(20.0)
    assert psnr_from_mse(0.0) == PSNR_CAP_DB


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


# ------------------------------------------------------------------ MS-SSIM

def test_gaussian_window_sums_to_one():
    w = gaussian_window(11, 1.5)
    assert w.shape == (11, 11) and abs(w.sum() - 1) < 1e-12 and w[5, 5] == w.max()


def test_scale_count():
    cfg = MetricConfig()
    assert cfg.scales_for(32, 64) == 2
    assert cfg.scales_for(128, 256) == 4
    assert cfg.scales_for(176, 176) == 5
    with pytest.raises(ShapeError):
        cfg.scales_for(8, 64)


def test_ms_ssim_identity():
    x = np.random.default_rng(0).random((2, 3, 32, 64))
    np.testing.assert_array_equal(ms_ssim_value(x, x), [1.0, 1.0])


def test_ms_ssim_matches_reference_on_random_pairs():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(20):
        x = rng.random((3, 32, 64))
        y = np.clip(x + rng.normal(0, rng.uniform(0.01, 0.3), x.shape), 0, 1)
        worst = max(worst, abs(ms_ssim_value(x, y) - reference_ms_ssim(x, y)))
    assert worst < 1e-4


def test_ms_ssim_matches_reference_five_scales():
    rng = np.random.default_rng(3)
    x = rng.random((1, 176, 180))
    y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
    assert abs(ms_ssim_value(x, y) - reference_ms_ssim(x, y)) < 1e-4


def test_ms_ssim_decreases_with_noise():
    rng = np.random.default_rng(8)
    x = rng.random((100, 3, 32, 32)) * 0.5 + 0.25
    means = [ms_ssim_value(x, x + rng.normal(0, s, x.shape)).mean() for s in (0.01, 0.05, 0.1)]
    assert means[0] > means[1] > means[2]


def test_one_minus_ms_ssim_gradient():
    rng = np.random.default_rng(5)
    x = rng.random((1, 1, 24, 24))
    y = Tensor(np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1), requires_grad=True)

    def loss():
        return ops.mean(ops.sub(1.0, ms_ssim(x, y)))

    with Tape() as tape:
        out = loss()
    backward(out, tape, [y])
    fd = numerical_grad(lambda: loss().item(), y.data, eps=1e-6)
    assert rel_error(y.grad, fd) < 1e-4


def test_ms_ssim_shape_mismatch():
    with pytest.raises(ShapeError):
        ms_ssim(np.zeros((1, 3, 32, 32)), np.zeros((1, 3, 32, 33)))
