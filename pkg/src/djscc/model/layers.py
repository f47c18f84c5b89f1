"""Parameter containers and the convolutional building blocks."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..channel import NOISELESS
from ..ndgrad import Tensor, ops
from ..ndgrad.conv import conv2d, conv2d_transpose


class Module:
    """Bare-bones parameter container.

    Parameters are Tensor attributes with ``requires_grad``; sub-modules and
    lists of sub-modules are walked recursively in attribute order.
    """

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            for name, p in _walk(value, prefix + key):
                out[name] = p
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())


def _walk(value, name: str) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".").items()
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _walk(v, f"{name}.{i}")


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int, dtype) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def constant(shape: tuple, value: float, dtype) -> Tensor:
    return Tensor(np.full(shape, value, dtype=dtype), requires_grad=True)


def normalize_snr(snrs_db, lo: float, hi: float) -> np.ndarray:
    """Map SNRs onto [0, 1] over ``[lo, hi]``; NOISELESS maps to 1."""
    mu = np.asarray(snrs_db, dtype=np.float64).reshape(-1)
    out = np.ones_like(mu)
    finite = np.isfinite(mu)
    out[finite] = np.clip((mu[finite] - lo) / (hi - lo), 0.0, 1.0)
    out[mu == -NOISELESS] = 0.0
    return out


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype, bias: bool = True):
        self.weight = uniform_init(rng, (n_in, n_out), n_in, dtype)
        self.bias = uniform_init(rng, (n_out,), n_in, dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        return ops.add(y, self.bias) if self.bias is not None else y


class ChannelNorm(Module):
    def __init__(self, channels: int, dtype):
        self.gain = constant((channels,), 1.0, dtype)
        self.bias = constant((channels,), 0.0, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.channel_norm(x, self.gain, self.bias)


class AFModule(Module):
    """SNR-conditioned channel gating.

    Global-average-pooled channel statistics are concatenated with the
    normalized SNR and mapped through two dense layers to sigmoid gates that
    rescale each channel.
    """

    def __init__(self, channels: int, hidden: int, snr_range: tuple, rng, dtype):
        self.fc1 = Linear(channels + 1, hidden, rng, dtype)
        self.fc2 = Linear(hidden, channels, rng, dtype)
        self.snr_range = snr_range

    def gates(self, features: Tensor, snrs_db) -> Tensor:
        b = features.shape[0]
        pooled = ops.mean(features, axis=(2, 3))
        mu = normalize_snr(snrs_db, *self.snr_range).astype(features.dtype).reshape(b, 1)
        z = ops.relu(self.fc1(ops.concat([pooled, Tensor(mu)], axis=1)))
        return ops.sigmoid(self.fc2(z))

    def __call__(self, features: Tensor, snrs_db) -> Tensor:
        g = self.gates(features, snrs_db)
        b, c = g.shape
        return ops.mul(features, ops.reshape(g, (b, c, 1, 1)))


def af_modulate(features: Tensor, snrs_db, af: AFModule) -> Tensor:
    return af(features, snrs_db)


class ConvBlock(Module):
    """conv (or transpose conv) -> ChannelNorm -> ReLU -> AF gating."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, upsample: bool,
                 af_hidden: int, snr_range: tuple, rng, dtype):
        fan_in = c_in * kernel * kernel
        shape = (c_in, c_out, kernel, kernel) if upsample else (c_out, c_in, kernel, kernel)
        self.kernel = uniform_init(rng, shape, fan_in, dtype)
        self.norm = ChannelNorm(c_out, dtype)
        self.af = AFModule(c_out, af_hidden, snr_range, rng, dtype)
        self.stride = stride
        self.upsample = upsample

    def __call__(self, x: Tensor, snrs_db) -> Tensor:
        if self.upsample:
            h = conv2d_transpose(x, self.kernel, stride=self.stride)
        else:
            h = conv2d(x, self.kernel, stride=self.stride)
        return self.af(ops.relu(self.norm(h)), snrs_db)


class Conv(Module):
    """A single convolution with bias, no norm or activation."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, upsample: bool, rng, dtype):
        fan_in = c_in * kernel * kernel
        shape = (c_in, c_out, kernel, kernel) if upsample else (c_out, c_in, kernel, kernel)
        self.kernel = uniform_init(rng, shape, fan_in, dtype)
        self.bias = constant((c_out,), 0.0, dtype)
        self.stride = stride
        self.upsample = upsample

    def __call__(self, x: Tensor) -> Tensor:
        if self.upsample:
            return conv2d_transpose(x, self.kernel, stride=self.stride, bias=self.bias)
        return conv2d(x, self.kernel, stride=self.stride, bias=self.bias)
