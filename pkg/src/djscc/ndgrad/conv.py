"""2-D convolution, its adjoint, and 2x2 average pooling.

Layouts follow the usual channels-first convention: images are
``[B, C, H, W]`` (or unbatched ``[C, H, W]``), conv kernels are
``[C_out, C_in, K, K]`` and transpose-conv kernels ``[C_in, C_out, K, K]``,
i.e. the same array as the conv whose adjoint is being taken.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, as_tensor, record


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """``[B, C, Hp, Wp]`` -> ``[B*ho*wo, C*k*k]`` patch matrix."""
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    b, c = xp.shape[:2]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b * ho * wo, c * k * k)


def _col2im(cols: np.ndarray, shape: tuple, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Scatter-add a patch matrix back onto a padded ``shape`` canvas."""
    b, c = shape[:2]
    patches = cols.reshape(b, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
    out = np.zeros(shape, dtype=cols.dtype)
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + hspan:stride, j:j + wspan:stride] += patches[..., i, j]
    return out


def _batched(x: Tensor):
    if x.ndim == 3:
        return True
    if x.ndim != 4:
        raise ShapeError(f"expected [C,H,W] or [B,C,H,W] input, got {x.shape}")
    return False


def _check_geometry(h: int, w: int, k: int, stride: int, padding: int) -> None:
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")
    if padding == (k - 1) // 2 and stride == 2 and (h % 2 or w % 2):
        raise ShapeError(f"stride-2 convolution needs even extents, got {h}x{w}")


def conv2d(x, kernels, stride: int = 1, padding: Optional[int] = None, bias=None) -> Tensor:
    """Cross-correlation of ``x`` with ``kernels``.

    ``padding`` defaults to ``(K - 1) // 2`` so stride 1 keeps the spatial
    extent and stride 2 halves it. ``padding=0`` gives a "valid" filter.
    """
    x, w = as_tensor(x), as_tensor(kernels)
    squeeze = _batched(x)
    if squeeze:
        x = _unsqueeze(x)
    b, c, h, wd = x.shape
    co, ci, k, k2 = w.shape
    if ci != c or k != k2:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernels {w.shape}")
    if padding is None:
        if k % 2 == 0:
            raise ShapeError(f"conv2d: kernel size must be odd, got {k}")
        padding = (k - 1) // 2
    _check_geometry(h, wd, k, stride, padding)
    p = padding
    ho = (h + 2 * p - k) // stride + 1
    wo = (wd + 2 * p - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {k} larger than padded input {h}x{wd}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    cols = _im2col(xp, k, stride, ho, wo)
    wmat = w.data.reshape(co, -1)
    out = (cols @ wmat.T).reshape(b, ho, wo, co).transpose(0, 3, 1, 2)
    inputs = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, co, 1, 1)
        inputs.append(bias)
    out = np.ascontiguousarray(out)

    def vjp(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, co)
        gw = (gmat.T @ cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = _col2im(gmat @ wmat, xp.shape, k, stride, ho, wo)
            gx = gxp[:, :, p:p + h, p:p + wd] if p else gxp
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    y = record(out, inputs, vjp, "conv2d")
    return _squeeze(y) if squeeze else y


def conv2d_transpose(x, kernels, stride: int = 1, bias=None) -> Tensor:
    """Adjoint of :func:`conv2d` (same padding rule); scales extents by ``stride``."""
    x, w = as_tensor(x), as_tensor(kernels)
    squeeze = _batched(x)
    if squeeze:
        x = _unsqueeze(x)
    b, c, h, wd = x.shape
    ci, co, k, k2 = w.shape
    if ci != c or k != k2:
        raise ShapeError(f"conv2d_transpose: input {x.shape} incompatible with kernels {w.shape}")
    if k % 2 == 0:
        raise ShapeError(f"conv2d_transpose: kernel size must be odd, got {k}")
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")
    p = (k - 1) // 2
    hout, wout = h * stride, wd * stride
    padded = (b, co, hout + 2 * p, wout + 2 * p)
    wmat = w.data.reshape(ci, -1)
    xmat = x.data.transpose(0, 2, 3, 1).reshape(-1, ci)
    full = _col2im(xmat @ wmat, padded, k, stride, h, wd)
    out = np.ascontiguousarray(full[:, :, p:p + hout, p:p + wout])
    inputs = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, co, 1, 1)
        inputs.append(bias)

    def vjp(g):
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p))) if p else g
        cols = _im2col(gp, k, stride, h, wd)
        gw = (xmat.T @ cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = np.ascontiguousarray((cols @ wmat.T).reshape(b, h, wd, ci).transpose(0, 3, 1, 2))
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    y = record(out, inputs, vjp, "conv2d_transpose")
    return _squeeze(y) if squeeze else y


def avg_pool2d(x) -> Tensor:
    """2x2 mean pooling with stride 2; odd trailing rows/columns are dropped."""
    x = as_tensor(x)
    *lead, h, wd = x.shape
    h2, w2 = h // 2, wd // 2
    if h2 < 1 or w2 < 1:
        raise ShapeError(f"avg_pool2d: input too small {x.shape}")
    crop = x.data[..., :2 * h2, :2 * w2]
    out = crop.reshape(*lead, h2, 2, w2, 2).mean(axis=(-3, -1))

    def vjp(g):
        gx = np.zeros_like(x.data)
        up = np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25
        gx[..., :2 * h2, :2 * w2] = up
        return (gx,)

    return record(out, (x,), vjp, "avg_pool2d")


def _unsqueeze(x: Tensor) -> Tensor:
    from .ops import reshape
    return reshape(x, (1,) + x.shape)


def _squeeze(x: Tensor) -> Tensor:
    from .ops import reshape
    return reshape(x, x.shape[1:])
