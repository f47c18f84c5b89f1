"""PSNR and (differentiable) MS-SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ndgrad import Tensor, as_tensor, ops
from .ndgrad.conv import avg_pool2d, conv2d
from .ndgrad.tensor import ShapeError

PSNR_CAP_DB = 100.0
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class MetricConfig:
    peak: float = 1.0
    weights: tuple = MS_SSIM_WEIGHTS
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    @property
    def c1(self) -> float:
        return (self.k1 * self.peak) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.peak) ** 2

    def scales_for(self, height: int, width: int) -> int:
        """Largest scale count whose coarsest level still fits the window."""
        smallest = min(height, width)
        if smallest < self.window:
            raise ShapeError(f"images of {height}x{width} are smaller than the {self.window}-tap window")
        n = 1
        while n < len(self.weights) and smallest >= self.window * 2 ** n:
            n += 1
        return n

    def weights_for(self, scales: int) -> np.ndarray:
        w = np.asarray(self.weights[:scales], dtype=np.float64)
        return w / w.sum()


def psnr(x, x_hat, peak: float = 1.0):
    """PSNR in dB; batched ``[B, ...]`` input gives one value per item."""
    a = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    b = np.asarray(x_hat.data if isinstance(x_hat, Tensor) else x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    axes = tuple(range(1, a.ndim)) if a.ndim == 4 else None
    mse = np.mean((a - b) ** 2, axis=axes)
    with np.errstate(divide="ignore"):
        val = np.where(mse > 0, 10.0 * np.log10(peak ** 2 / np.maximum(mse, 1e-300)), PSNR_CAP_DB)
    return float(val) if val.ndim == 0 else val


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-r ** 2 / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def _filter(t: Tensor, kernel: Tensor) -> Tensor:
    b, c, h, w = t.shape
    out = conv2d(ops.reshape(t, (b * c, 1, h, w)), kernel, padding=0)
    return ops.reshape(out, (b, c) + out.shape[2:])


def _ssim_terms(x: Tensor, y: Tensor, kernel: Tensor, cfg: MetricConfig) -> tuple[Tensor, Tensor]:
    """Per-(item, channel) mean luminance*cs and mean cs."""
    mu_x, mu_y = _filter(x, kernel), _filter(y, kernel)
    mu_xx, mu_yy, mu_xy = ops.mul(mu_x, mu_x), ops.mul(mu_y, mu_y), ops.mul(mu_x, mu_y)
    s_xx = ops.sub(_filter(ops.mul(x, x), kernel), mu_xx)
    s_yy = ops.sub(_filter(ops.mul(y, y), kernel), mu_yy)
    s_xy = ops.sub(_filter(ops.mul(x, y), kernel), mu_xy)
    cs_map = ops.div(ops.add(ops.scale(s_xy, 2.0), cfg.c2), ops.add(ops.add(s_xx, s_yy), cfg.c2))
    lum = ops.div(ops.add(ops.scale(mu_xy, 2.0), cfg.c1), ops.add(ops.add(mu_xx, mu_yy), cfg.c1))
    return ops.mean(ops.mul(lum, cs_map), axis=(2, 3)), ops.mean(cs_map, axis=(2, 3))


def ms_ssim(x, x_hat, config: MetricConfig = MetricConfig()) -> Tensor:
    """Multi-scale SSIM, differentiable through the engine.

    Contrast-structure terms of every scale but the coarsest are combined
    with the full SSIM of the coarsest scale, each raised to its weight;
    negative terms are clipped to zero first. Channels are averaged at the
    end. Returns shape ``[B]`` for batched input, a scalar for ``[C,H,W]``.
    The scale count drops (weights renormalized) when images are too small
    for five scales.
    """
    a, b = as_tensor(x), as_tensor(x_hat)
    if a.shape != b.shape:
        raise ShapeError(f"ms_ssim: shape mismatch {a.shape} vs {b.shape}")
    single = a.ndim == 3
    if single:
        a, b = ops.reshape(a, (1,) + a.shape), ops.reshape(b, (1,) + b.shape)
    scales = config.scales_for(*a.shape[2:])
    weights = config.weights_for(scales)
    kernel = Tensor(gaussian_window(config.window, config.sigma).astype(a.dtype)[None, None])
    total = None
    for i in range(scales):
        ssim_val, cs = _ssim_terms(a, b, kernel, config)
        term = ssim_val if i == scales - 1 else cs
        factor = ops.power(ops.relu(term), float(weights[i]))
        total = factor if total is None else ops.mul(total, factor)
        if i < scales - 1:
            a, b = avg_pool2d(a), avg_pool2d(b)
    out = ops.mean(total, axis=1)
    return ops.reshape(out, ()) if single else out


def ms_ssim_value(x, x_hat, config: MetricConfig = MetricConfig()):
    """Plain-number convenience wrapper around :func:`ms_ssim`."""
    out = ms_ssim(np.asarray(x, dtype=np.float64), np.asarray(x_hat, dtype=np.float64), config).data
    return float(out) if out.ndim == 0 else out


def psnr_from_mse(mse: float, peak: float = 1.0) -> float:
    return PSNR_CAP_DB if mse <= 0 else 10.0 * math.log10(peak ** 2 / mse)
