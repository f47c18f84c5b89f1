"""Training: distortion loss, SNR sampling and the Adam loop."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..channel import NOISELESS
from ..data import PairDirectory, stack, synthetic_pairs
from ..metrics import ms_ssim
from ..model import JointModel
from ..ndgrad import AdamState, Tape, Tensor, adam_step, backward, ops
from ..ndgrad.tensor import ShapeError
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, TrainConfig

logger = logging.getLogger(__name__)

# Stream ids for the per-iteration generators.
_BATCH, _SNR, _NOISE = 0, 1, 2


class TrainingDiverged(RuntimeError):
    pass


def _distortion(a, b, kind: str) -> Tensor:
    if kind == "mse":
        d = ops.sub(a, b)
        return ops.mean(ops.mul(d, d))
    if kind == "ms_ssim":
        return ops.mean(ops.sub(1.0, ms_ssim(a, b)))
    raise ValueError(f"unknown distortion {kind!r}")


def distortion_loss(x, x_hat, y, y_hat, alpha: float = 1.0, kind: str = "mse") -> Tensor:
    """``d(x, x_hat) + alpha * d(y, y_hat)``, each averaged over the batch."""
    if np.shape(x) != tuple(x_hat.shape) or np.shape(y) != tuple(y_hat.shape):
        raise ShapeError(f"distortion_loss: shape mismatch {np.shape(x)}/{x_hat.shape}, "
                         f"{np.shape(y)}/{y_hat.shape}")
    dx = _distortion(x, x_hat, kind)
    if alpha == 0:
        # keep y_hat on the tape so its adjoint is an explicit zero
        return ops.add(dx, ops.scale(_distortion(y, y_hat, kind), 0.0))
    return ops.add(dx, ops.scale(_distortion(y, y_hat, kind), alpha))


def sample_link_snrs(rng: np.random.Generator, cfg: TrainConfig, batch: int) -> tuple[np.ndarray, np.ndarray]:
    """Independent uniform SNR draws in dB, one per item and link."""
    mu_x = rng.uniform(cfg.snr_lo, cfg.snr_hi, size=batch)
    mu_y = rng.uniform(cfg.snr_lo, cfg.snr_hi, size=batch)
    if cfg.noiseless_prob > 0:
        flips = rng.random((2, batch)) < cfg.noiseless_prob
        mu_x[flips[0]] = NOISELESS
        mu_y[flips[1]] = NOISELESS
    if cfg.asymmetric:
        mu_y[:] = NOISELESS
    return mu_x, mu_y


def iteration_rng(seed: int, iteration: int, stream: int) -> np.random.Generator:
    """Generator determined by (seed, iteration, stream) alone, so resumed runs match."""
    return np.random.default_rng([seed, iteration, stream])


def load_training_data(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.data.source == "directory":
        d = PairDirectory(cfg.data.directory, height=cfg.data.height, width=cfg.data.width)
        pairs = list(d)
        if not pairs:
            raise ValueError(f"no image pairs found in {cfg.data.directory}")
    else:
        pairs = synthetic_pairs(cfg.data, "train")
    x, y = stack(pairs)
    dt = np.dtype(cfg.model.dtype)
    return x.astype(dt), y.astype(dt)


def train_step(model: JointModel, adam: AdamState, x: np.ndarray, y: np.ndarray,
               cfg: TrainConfig, iteration: int, lr: Optional[float] = None) -> float:
    """One forward/backward/Adam update; returns the pre-update loss.

    ``lr`` overrides ``cfg.lr`` (the config itself only admits positive rates).
    """
    mu_x, mu_y = sample_link_snrs(iteration_rng(cfg.noise_seed, iteration, _SNR), cfg, x.shape[0])
    noise_rng = iteration_rng(cfg.noise_seed, iteration, _NOISE)
    params = model.named_parameters()
    with Tape() as tape:
        x_hat, y_hat = model(x, y, mu_x, mu_y, noise_rng, cfg.channel)
        loss = distortion_loss(x, x_hat, y, y_hat, cfg.alpha, cfg.loss)
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite loss {value} at iteration {iteration} "
                               f"(seed={cfg.seed}, data_seed={cfg.data_seed}, noise_seed={cfg.noise_seed})")
    backward(loss, tape, list(params.values()))
    tape.clear()
    adam_step(params, {n: p.grad for n, p in params.items()}, adam, cfg.lr if lr is None else lr)
    return value


class Trainer:
    """Owns a model, its optimizer state and the training set."""

    def __init__(self, cfg: RunConfig, model: Optional[JointModel] = None,
                 adam: Optional[AdamState] = None, iteration: int = 0):
        self.cfg = cfg
        self.model = model or JointModel(cfg.model, seed=cfg.train.seed)
        self.adam = adam or AdamState()
        self.iteration = iteration
        self.x, self.y = load_training_data(cfg)
        self.history: list[tuple[int, float]] = []

    @classmethod
    def resume(cls, cfg: RunConfig, path) -> "Trainer":
        ckpt = load_checkpoint(path, expected=cfg.model)
        return cls(cfg, ckpt.model, ckpt.adam, ckpt.iteration)

    def batch(self, iteration: int) -> tuple[np.ndarray, np.ndarray]:
        t = self.cfg.train
        rng = iteration_rng(t.data_seed, iteration, _BATCH)
        idx = rng.integers(0, len(self.x), size=t.batch_size)
        return self.x[idx], self.y[idx]

    def step(self) -> float:
        x, y = self.batch(self.iteration)
        loss = train_step(self.model, self.adam, x, y, self.cfg.train, self.iteration)
        self.iteration += 1
        self.history.append((self.iteration, loss))
        return loss

    def save(self, path) -> None:
        save_checkpoint(path, self.cfg, self.model, self.iteration, self.adam)

    def run(self, until: Optional[int] = None, out: Optional[Path] = None,
            callback: Optional[Callable[[int, float], None]] = None) -> list[tuple[int, float]]:
        t = self.cfg.train
        until = t.iterations if until is None else until
        window: list[float] = []
        while self.iteration < until:
            loss = self.step()
            window.append(loss)
            if callback is not None:
                callback(self.iteration, loss)
            if t.log_every and self.iteration % t.log_every == 0:
                logger.info("iter %d  loss %.6f", self.iteration, float(np.mean(window)))
                window.clear()
            if out is not None and t.checkpoint_every and self.iteration % t.checkpoint_every == 0:
                self.save(out)
        if out is not None:
            self.save(out)
        return self.history
