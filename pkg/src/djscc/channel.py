"""Complex-symbol framing, power normalization and link transfer functions.

Signals are batched: a :class:`ComplexSignal` wraps a ``[B, k, 2]`` tensor
of (real, imaginary) pairs, one row of ``k`` channel uses per batch item.
SNRs are given in dB, one per item; ``NOISELESS`` (``+inf``) marks a
lossless link.
"""

from __future__ import annotations

import collections
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ndgrad import Tensor, ops

logger = logging.getLogger(__name__)

NOISELESS = math.inf

CHANNEL_KINDS = ("awgn", "rayleigh", "noiseless")

FADING_FLOOR = 1e-12


class DegenerateSignalError(ValueError):
    """An all-zero signal cannot be normalized to a power budget."""


class FramingError(ValueError):
    pass


def is_noiseless(mu) -> bool:
    return mu == NOISELESS


@dataclass(frozen=True)
class ChannelParams:
    """Power budget, SNR and link kind for one transmission."""

    power: float = 1.0
    snr_db: float = 0.0
    kind: str = "awgn"

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if (self.kind == "noiseless") != is_noiseless(self.snr_db):
            raise ValueError("kind 'noiseless' goes together with snr_db=NOISELESS")

    @property
    def noise_variance(self) -> float:
        if is_noiseless(self.snr_db):
            return 0.0
        return snr_to_noise_variance(self.snr_db, self.power)


class ComplexSignal:
    """Batch of complex symbol vectors stored as ``[B, k, 2]`` reals."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Tensor):
        if pairs.ndim != 3 or pairs.shape[-1] != 2:
            raise FramingError(f"expected [B, k, 2] storage, got {pairs.shape}")
        self.pairs = pairs

    @property
    def k(self) -> int:
        return self.pairs.shape[1]

    @property
    def batch(self) -> int:
        return self.pairs.shape[0]

    def to_complex(self) -> np.ndarray:
        d = self.pairs.data
        return d[..., 0] + 1j * d[..., 1]

    def power(self) -> np.ndarray:
        """Squared l2 norm per batch item."""
        return (self.pairs.data ** 2).sum(axis=(1, 2))


def frame(bottleneck: Tensor) -> ComplexSignal:
    """Pair consecutive flattened entries of ``[B, C*, h, w]`` into symbols."""
    if bottleneck.ndim != 4:
        raise FramingError(f"expected [B, C*, h, w] bottleneck, got {bottleneck.shape}")
    b = bottleneck.shape[0]
    n = int(np.prod(bottleneck.shape[1:]))
    if n % 2:
        raise FramingError(f"bottleneck has odd element count {n}; cannot pair into symbols")
    return ComplexSignal(ops.reshape(bottleneck, (b, n // 2, 2)))


def unframe(signal: ComplexSignal, shape: Sequence[int]) -> Tensor:
    """Inverse of :func:`frame`; ``shape`` excludes the batch axis."""
    shape = tuple(shape)
    if int(np.prod(shape)) != 2 * signal.k:
        raise FramingError(f"cannot unframe {signal.k} symbols into {shape}")
    return ops.reshape(signal.pairs, (signal.batch,) + shape)


def power_normalize(signal: ComplexSignal, power: float = 1.0) -> ComplexSignal:
    """Rescale each item to ``||s||^2 = k * power`` (differentiable)."""
    energy = signal.power()
    if np.any(energy <= 0):
        bad = np.flatnonzero(energy <= 0).tolist()
        raise DegenerateSignalError(f"all-zero signal for batch items {bad}")
    s = signal.pairs
    norm = ops.sqrt(ops.sum(ops.mul(s, s), axis=(1, 2), keepdims=True))
    target = math.sqrt(signal.k * power)
    return ComplexSignal(ops.scale(ops.div(s, norm), target))


def snr_to_noise_variance(snr_db: float, power: float = 1.0) -> float:
    """Complex noise variance for an SNR in dB: ``P * 10**(-snr/10)``."""
    if not math.isfinite(snr_db):
        raise ValueError("noise variance undefined for a NOISELESS link; use noiseless_transfer")
    return power * 10.0 ** (-snr_db / 10.0)


def _per_item(noise_var, batch: int, dtype) -> np.ndarray:
    var = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), (batch,))
    if np.any(var < 0):
        raise ValueError(f"noise variance must be non-negative, got {var.min()}")
    return var.astype(dtype).reshape(batch, 1, 1)


def awgn_transfer(signal: ComplexSignal, noise_var, rng: np.random.Generator) -> ComplexSignal:
    """Add circularly-symmetric complex Gaussian noise, ``noise_var / 2`` per component.

    ``noise_var`` is a scalar or one value per batch item. Gradients pass
    straight through to the transmitted symbols.
    """
    s = signal.pairs
    var = _per_item(noise_var, s.shape[0], s.dtype)
    noise = rng.standard_normal(s.shape).astype(s.dtype) * np.sqrt(var / 2)
    return ComplexSignal(ops.add(s, noise))


def draw_fading(k_shape: tuple, rng: np.random.Generator,
                counter: Optional[collections.Counter] = None) -> np.ndarray:
    """Unit-variance complex Gaussian fading gains, redrawing near-zero taps."""
    h = (rng.standard_normal(k_shape) + 1j * rng.standard_normal(k_shape)) / math.sqrt(2)
    while True:
        small = np.abs(h) < FADING_FLOOR
        n = int(small.sum())
        if not n:
            return h
        if counter is not None:
            counter["fading_redraws"] += n
        logger.debug("redrawing %d near-zero fading taps", n)
        h[small] = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)


def rayleigh_transfer(signal: ComplexSignal, noise_var, rng: np.random.Generator,
                      counter: Optional[collections.Counter] = None) -> ComplexSignal:
    """Fast Rayleigh fading with perfect CSI and zero-forcing equalization.

    Each symbol sees ``h_i s_i + n_i``; the receiver divides by the known
    ``h_i``, so the decoder input is ``s_i + n_i / h_i``.
    """
    s = signal.pairs
    b, k = s.shape[:2]
    var = _per_item(noise_var, b, np.float64)[:, :, 0]
    h = draw_fading((b, k), rng, counter)
    n = (rng.standard_normal((b, k)) + 1j * rng.standard_normal((b, k))) * np.sqrt(var / 2)
    eff = n / h
    noise = np.stack([eff.real, eff.imag], axis=-1).astype(s.dtype)
    return ComplexSignal(ops.add(s, noise))


def noiseless_transfer(signal: ComplexSignal) -> ComplexSignal:
    return signal


def transmit(signal: ComplexSignal, snrs_db: Sequence[float], kind: str,
             rng: np.random.Generator, power: float = 1.0,
             counter: Optional[collections.Counter] = None) -> ComplexSignal:
    """Send each batch item over its own link.

    Items whose SNR is ``NOISELESS`` pass unchanged; the rest see ``kind``
    ("awgn" or "rayleigh") at their SNR. Noise is drawn for the whole batch
    so the random stream does not depend on which items are noiseless.
    """
    snrs = np.asarray(snrs_db, dtype=np.float64).reshape(-1)
    if snrs.size != signal.batch:
        raise ValueError(f"{snrs.size} SNRs for a batch of {signal.batch}")
    if kind == "noiseless" or np.all(np.isinf(snrs)):
        return noiseless_transfer(signal)
    finite = np.isfinite(snrs)
    var = np.zeros_like(snrs)
    var[finite] = power * 10.0 ** (-snrs[finite] / 10.0)
    if kind == "awgn":
        return awgn_transfer(signal, var, rng)
    if kind == "rayleigh":
        return rayleigh_transfer(signal, var, rng, counter)
    raise ValueError(f"unknown channel kind {kind!r}")
