"""Edge encoders and the shared joint decoder."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..channel import ComplexSignal, frame, power_normalize, transmit, unframe
from ..ndgrad import Tensor, ops
from ..ndgrad.tensor import ShapeError
from .layers import Conv, ConvBlock, Module
from .scam import SCAM

DOWNSCALES = 3


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; everything a checkpoint must match.

    ``widths`` and ``kernels`` describe the three downscaling encoder stages
    (the decoder mirrors them). ``scam_stages`` lists decoder stages followed
    by a cross attention module: stage 0 works at 1/8 resolution (one row per
    8x8 pixel patch), stage 1 at 1/4, stage 2 at 1/2. An empty tuple gives the
    independent-decoding baseline.
    """

    widths: tuple = (32, 64, 64)
    kernels: tuple = (9, 5, 5)
    bottleneck: int = 8
    bottleneck_kernel: int = 3
    scam_stages: tuple = (0, 1)
    mlp_ratio: int = 4
    af_hidden: int = 16
    token_interval: float = 1.0
    snr_lo: float = -3.0
    snr_hi: float = 14.0
    power: float = 1.0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        object.__setattr__(self, "scam_stages", tuple(sorted(int(s) for s in self.scam_stages)))
        if len(self.widths) != DOWNSCALES or len(self.kernels) != DOWNSCALES:
            raise ValueError(f"widths and kernels need {DOWNSCALES} entries each")
        if any(k % 2 == 0 for k in self.kernels + (self.bottleneck_kernel,)):
            raise ValueError(f"kernel sizes must be odd: {self.kernels}, {self.bottleneck_kernel}")
        if self.bottleneck < 1:
            raise ValueError("bottleneck width must be positive")
        if any(s not in (0, 1, 2) for s in self.scam_stages) or len(set(self.scam_stages)) != len(self.scam_stages):
            raise ValueError(f"scam_stages must be distinct values in 0..2, got {self.scam_stages}")
        if self.snr_hi <= self.snr_lo or self.token_interval <= 0:
            raise ValueError("token range needs snr_lo < snr_hi and a positive interval")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")

    @property
    def snr_range(self) -> tuple:
        return (self.snr_lo, self.snr_hi)

    def symbols(self, height: int, width: int) -> int:
        """Complex channel uses per image."""
        check_extents(height, width)
        return self.bottleneck * (height >> DOWNSCALES) * (width >> DOWNSCALES) // 2

    def bandwidth_ratio(self, height: int, width: int, channels: int = 3) -> float:
        return self.symbols(height, width) / (channels * height * width)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("widths", "kernels", "scam_stages"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def check_extents(height: int, width: int) -> None:
    step = 1 << DOWNSCALES
    if height % step or width % step or height <= 0 or width <= 0:
        raise ShapeError(f"image extents {height}x{width} must be positive multiples of {step}")


def _as_batch(images) -> tuple[Tensor, bool]:
    t = images if isinstance(images, Tensor) else Tensor(images)
    if t.ndim == 3:
        return ops.reshape(t, (1,) + t.shape), True
    if t.ndim != 4 or t.shape[1] != 3:
        raise ShapeError(f"expected [3,H,W] or [B,3,H,W] images, got {t.shape}")
    return t, False


def _snrs(snrs_db, batch: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(snrs_db, dtype=np.float64), (batch,)).copy()


class Encoder(Module):
    """Three downscaling blocks, then a single conv into ``bottleneck`` channels."""

    def __init__(self, cfg: ModelConfig, rng):
        dt = np.dtype(cfg.dtype)
        chans = (3,) + cfg.widths
        self.blocks = [ConvBlock(chans[i], chans[i + 1], cfg.kernels[i], 2, False,
                                 cfg.af_hidden, cfg.snr_range, rng, dt) for i in range(DOWNSCALES)]
        self.compress = Conv(cfg.widths[-1], cfg.bottleneck, cfg.bottleneck_kernel, 1, False, rng, dt)

    def __call__(self, x: Tensor, snrs_db) -> Tensor:
        for block in self.blocks:
            x = block(x, snrs_db)
        return self.compress(x)


class Decoder(Module):
    """Decompression block, two upscaling blocks and an upscaling output conv.

    Both streams run through the same parameters; cross attention couples
    them after the configured stages.
    """

    def __init__(self, cfg: ModelConfig, rng):
        dt = np.dtype(cfg.dtype)
        w1, w2, w3 = cfg.widths
        k1, k2, k3 = cfg.kernels
        self.blocks = [
            ConvBlock(cfg.bottleneck, w3, cfg.bottleneck_kernel, 1, False,
                      cfg.af_hidden, cfg.snr_range, rng, dt),
            ConvBlock(w3, w2, k3, 2, True, cfg.af_hidden, cfg.snr_range, rng, dt),
            ConvBlock(w2, w1, k2, 2, True, cfg.af_hidden, cfg.snr_range, rng, dt),
        ]
        stage_channels = (w3, w2, w1)
        self.scams = [SCAM(stage_channels[s], cfg.mlp_ratio, cfg.snr_range, cfg.token_interval, rng, dt)
                      for s in cfg.scam_stages]
        self.scam_stages = cfg.scam_stages
        self.output = Conv(w1, 3, k1, 2, True, rng, dt)

    def __call__(self, fx: Tensor, fy: Tensor, snr_x, snr_y) -> tuple[Tensor, Tensor]:
        for i, block in enumerate(self.blocks):
            fx = block(fx, snr_x)
            fy = block(fy, snr_y)
            if i in self.scam_stages:
                scam = self.scams[self.scam_stages.index(i)]
                fx, fy = scam(fx, fy, snr_x, snr_y)
        return ops.sigmoid(self.output(fx)), ops.sigmoid(self.output(fy))


def jsce_encode(images, snrs_db, encoder: Encoder, cfg: ModelConfig) -> ComplexSignal:
    """Encode a batch of ``[3, H, W]`` images into power-normalized symbols."""
    x, _ = _as_batch(images)
    check_extents(*x.shape[2:])
    x = Tensor(x.data.astype(cfg.dtype, copy=False), requires_grad=x.requires_grad) \
        if x.dtype != np.dtype(cfg.dtype) else x
    z = encoder(x, _snrs(snrs_db, x.shape[0]))
    return power_normalize(frame(z), cfg.power)


def jscd_decode(sig_x: ComplexSignal, sig_y: ComplexSignal, snr_x, snr_y, decoder: Decoder,
                cfg: ModelConfig, height: int, width: int) -> tuple[Tensor, Tensor]:
    """Jointly reconstruct both images from their received symbols."""
    if sig_x.batch != sig_y.batch:
        raise ShapeError(f"stream batch sizes differ: {sig_x.batch} vs {sig_y.batch}")
    shape = (cfg.bottleneck, height >> DOWNSCALES, width >> DOWNSCALES)
    fx, fy = unframe(sig_x, shape), unframe(sig_y, shape)
    b = sig_x.batch
    return decoder(fx, fy, _snrs(snr_x, b), _snrs(snr_y, b))


class JointModel(Module):
    """Two independent encoders and one shared joint decoder."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = cfg
        self.enc_x = Encoder(cfg, rng)
        self.enc_y = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng)

    def encode(self, x, y, snr_x, snr_y) -> tuple[ComplexSignal, ComplexSignal]:
        return (jsce_encode(x, snr_x, self.enc_x, self.config),
                jsce_encode(y, snr_y, self.enc_y, self.config))

    def decode(self, sig_x, sig_y, snr_x, snr_y, height: int, width: int):
        return jscd_decode(sig_x, sig_y, snr_x, snr_y, self.decoder, self.config, height, width)

    def __call__(self, x, y, snr_x, snr_y, rng: np.random.Generator, kind: str = "awgn",
                 counter: Optional[dict] = None) -> tuple[Tensor, Tensor]:
        """Full link: encode, transmit each stream at its SNR, decode jointly."""
        xb, _ = _as_batch(x)
        yb, _ = _as_batch(y)
        if xb.shape != yb.shape:
            raise ShapeError(f"image batches differ: {xb.shape} vs {yb.shape}")
        b, _, h, w = xb.shape
        snr_x, snr_y = _snrs(snr_x, b), _snrs(snr_y, b)
        sx, sy = self.encode(xb, yb, snr_x, snr_y)
        rx = transmit(sx, snr_x, kind, rng, self.config.power, counter)
        ry = transmit(sy, snr_y, kind, rng, self.config.power, counter)
        return self.decode(rx, ry, snr_x, snr_y, h, w)
