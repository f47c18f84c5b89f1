"""Differentiable dense operations.

Every op takes Tensors (plain arrays are wrapped as constants) and returns a
new Tensor; when a tape is recording, the op registers its vector-Jacobian
product. Arithmetic broadcasts like numpy.
"""

from __future__ import annotations

import builtins
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, record


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, what: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{what}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return record(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return record(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return record(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape),
                             _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def vjp(g):
        ga = g / b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)

    return record(out, (a, b), vjp, "div")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return record(a.data * c, (a,), lambda g: (g * c,), "scale")


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    return record(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),), "power")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return record(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return record(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return record(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return record(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split form avoids overflow in exp for large |a|
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype)
    return record(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


# ------------------------------------------------------------------ matmul

def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return record(a.data @ b.data, (a, b), vjp, "matmul")


# -------------------------------------------------------------- reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return record(np.asarray(out), (a,), vjp, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    n = 1
    for ax in axes:
        n *= a.shape[ax]
    # divide rather than multiply by 1/n so the mean of equal values is exact
    out = a.data.sum(axis=axes, keepdims=keepdims) / n

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / n, a.shape),)

    return record(np.asarray(out), (a,), vjp, "mean")


# ---------------------------------------------------------- shape plumbing

def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from None
    return record(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes)
    return record(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),), "transpose")


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        full = np.zeros_like(a.data)
        if _is_fancy(index):
            np.add.at(full, index, g)
        else:
            full[index] += g
        return (full,)

    return record(a.data[index], (a,), vjp, "slice")


def _is_fancy(index) -> bool:
    idx = index if isinstance(index, tuple) else (index,)
    return builtins.any(isinstance(i, (list, np.ndarray)) for i in idx)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    ref = ts[0].shape
    ax = axis % len(ref)
    for t in ts[1:]:
        if t.ndim != len(ref) or builtins.any(
                t.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeError(f"concat along axis {axis}: incompatible shapes "
                             f"{[x.shape for x in ts]}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def vjp(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
                     for i in range(len(ts)))

    return record(np.concatenate([t.data for t in ts], axis=ax), ts, vjp, "concat")


def take(a, indices) -> Tensor:
    """Gather rows of ``a`` (an embedding-table lookup along axis 0)."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx.ravel(), g.reshape((idx.size,) + a.shape[1:]))
        return (full,)

    return record(a.data[idx], (a,), vjp, "take")


# ---------------------------------------------------------- normalizations

def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record(out, (a,), vjp, "softmax")


def _normalize(a: Tensor, gain: Tensor, bias: Tensor, axis: int, eps: float, label: str) -> Tensor:
    x = a.data
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    bshape = [1] * x.ndim
    bshape[axis] = x.shape[axis]
    gd = gain.data.reshape(bshape)
    out = xhat * gd + bias.data.reshape(bshape)
    red = tuple(i for i in range(x.ndim) if i != axis)

    def vjp(g):
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(axis=axis, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True))
        dgain = (g * xhat).sum(axis=red).reshape(gain.shape)
        dbias = g.sum(axis=red).reshape(bias.shape)
        return dx, dgain, dbias

    return record(out, (a, gain, bias), vjp, label)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize each row over the last axis, then apply per-channel affine."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(f"layer_norm: affine shapes {gain.shape}/{bias.shape} "
                         f"do not match channel extent {a.shape[-1]}")
    return _normalize(a, gain, bias, a.ndim - 1, eps, "layer_norm")


def channel_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize across channels independently at every spatial position.

    Accepts ``C x H x W`` or batched ``B x C x H x W`` input.
    """
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    axis = a.ndim - 3
    if axis < 0:
        raise ShapeError(f"channel_norm: expected C x H x W input, got {a.shape}")
    if gain.shape != (a.shape[axis],) or bias.shape != (a.shape[axis],):
        raise ShapeError(f"channel_norm: affine shapes {gain.shape}/{bias.shape} "
                         f"do not match channel extent {a.shape[axis]}")
    return _normalize(a, gain, bias, axis, eps, "channel_norm")
