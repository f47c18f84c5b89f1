"""SNR-aware cross attention between the two decoder streams.

Each stream's feature map is flattened to one row per spatial position,
prefixed with a learnable quality token chosen by that link's SNR, and
recalibrated by attending over the partner stream's rows. The token row is
dropped again afterwards.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import is_noiseless
from ..ndgrad import Tensor, ops
from ..ndgrad.tensor import ShapeError
from .layers import Module, constant, uniform_init


class QualityTokenBank(Module):
    """``m`` SNR-bin tokens covering ``[lo, hi]`` plus one noiseless token."""

    def __init__(self, channels: int, lo: float, hi: float, interval: float, rng, dtype):
        if hi <= lo or interval <= 0:
            raise ValueError(f"bad token range [{lo}, {hi}] / interval {interval}")
        self.lo, self.hi, self.interval = float(lo), float(hi), float(interval)
        self.count = math.ceil((hi - lo) / interval) + 1
        self.tokens = Tensor((0.02 * rng.standard_normal((self.count, channels))).astype(dtype),
                             requires_grad=True)
        self.noiseless = Tensor((0.02 * rng.standard_normal((1, channels))).astype(dtype),
                                requires_grad=True)

    @property
    def channels(self) -> int:
        return self.tokens.shape[1]

    def lookup(self, snrs_db) -> Tensor:
        """Token rows ``[B, C]`` for a batch of SNRs."""
        idx = [select_token(mu, self) for mu in np.asarray(snrs_db, dtype=np.float64).reshape(-1)]
        table = ops.concat([self.tokens, self.noiseless], axis=0)
        return ops.take(table, idx)


def select_token(snr_db: float, bank: QualityTokenBank) -> int:
    """Index of the token covering ``snr_db``.

    Bins are ``[lo + j*interval, lo + (j+1)*interval)``, counted from 0;
    the SNR is clamped into ``[lo, hi]`` first. NOISELESS selects index
    ``bank.count``, the slot of the dedicated noiseless token.
    """
    if is_noiseless(snr_db):
        return bank.count
    mu = min(max(float(snr_db), bank.lo), bank.hi)
    return min(int(math.floor((mu - bank.lo) / bank.interval)), bank.count - 1)


def attach_token(features: Tensor, token: Tensor) -> Tensor:
    """``[B, C, h, w]`` features and ``[B, C]`` tokens -> ``[B, h*w + 1, C]``.

    Row 0 is the token, then spatial positions in row-major (h, w) order.
    Unbatched ``[C, h, w]`` / ``[C]`` inputs give ``[h*w + 1, C]``.
    """
    if features.ndim == 3:
        out = attach_token(ops.reshape(features, (1,) + features.shape),
                           ops.reshape(token, (1, -1)))
        return ops.reshape(out, out.shape[1:])
    b, c, h, w = features.shape
    if token.shape != (b, c):
        raise ShapeError(f"token shape {token.shape} does not match features {features.shape}")
    rows = ops.transpose(ops.reshape(features, (b, c, h * w)), (0, 2, 1))
    return ops.concat([ops.reshape(token, (b, 1, c)), rows], axis=1)


def detach_token(rows: Tensor, h: int, w: int) -> Tensor:
    """Drop row 0 and fold the rest back to ``[B, C, h, w]`` (or ``[C, h, w]``)."""
    if rows.ndim == 2:
        out = detach_token(ops.reshape(rows, (1,) + rows.shape), h, w)
        return ops.reshape(out, out.shape[1:])
    b, m1, c = rows.shape
    if m1 != h * w + 1:
        raise ShapeError(f"{m1} rows cannot fold back to {h}x{w} plus a token")
    spatial = ops.getitem(rows, (slice(None), slice(1, None), slice(None)))
    return ops.reshape(ops.transpose(spatial, (0, 2, 1)), (b, c, h, w))


class ScamParams(Module):
    """Projection, output and MLP weights for one attention layer."""

    def __init__(self, channels: int, hidden: int, rng, dtype):
        c = channels
        self.ln1_gain = constant((c,), 1.0, dtype)
        self.ln1_bias = constant((c,), 0.0, dtype)
        self.w_q = uniform_init(rng, (c, c), c, dtype)
        self.w_k = uniform_init(rng, (c, c), c, dtype)
        self.w_v = uniform_init(rng, (c, c), c, dtype)
        self.w_o = uniform_init(rng, (c, c), c, dtype)
        self.ln2_gain = constant((c,), 1.0, dtype)
        self.ln2_bias = constant((c,), 0.0, dtype)
        self.w_1 = uniform_init(rng, (c, hidden), c, dtype)
        self.b_1 = uniform_init(rng, (hidden,), c, dtype)
        self.w_2 = uniform_init(rng, (hidden, c), hidden, dtype)
        self.b_2 = uniform_init(rng, (c,), hidden, dtype)

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]


def _swap_last(t: Tensor) -> Tensor:
    axes = list(range(t.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ops.transpose(t, tuple(axes))


def _recalibrate(fbar: Tensor, q: Tensor, k_partner: Tensor, v_partner: Tensor,
                 p: ScamParams) -> Tensor:
    c = fbar.shape[-1]
    scores = ops.scale(ops.matmul(q, _swap_last(k_partner)), 1.0 / math.sqrt(c))
    attn = ops.softmax(scores, axis=-1)
    h1 = ops.add(fbar, ops.matmul(ops.matmul(attn, v_partner), p.w_o))
    hidden = ops.relu(ops.add(ops.matmul(ops.layer_norm(h1, p.ln2_gain, p.ln2_bias), p.w_1), p.b_1))
    return ops.add(h1, ops.add(ops.matmul(hidden, p.w_2), p.b_2))


def scam_pair(fbar_x: Tensor, fbar_y: Tensor, p: ScamParams) -> tuple[Tensor, Tensor]:
    """Cross-attend two token-prefixed row matrices; returns full rows (token included).

    Queries come from the current stream, keys and values from the partner,
    and the softmax normalizes over partner positions.
    """
    if fbar_x.shape[-1] != fbar_y.shape[-1]:
        raise ShapeError(f"stream channel counts differ: {fbar_x.shape} vs {fbar_y.shape}")
    if fbar_x.shape[-1] != p.channels:
        raise ShapeError(f"features have {fbar_x.shape[-1]} channels, parameters {p.channels}")
    nx = ops.layer_norm(fbar_x, p.ln1_gain, p.ln1_bias)
    ny = ops.layer_norm(fbar_y, p.ln1_gain, p.ln1_bias)
    qx, kx, vx = ops.matmul(nx, p.w_q), ops.matmul(nx, p.w_k), ops.matmul(nx, p.w_v)
    qy, ky, vy = ops.matmul(ny, p.w_q), ops.matmul(ny, p.w_k), ops.matmul(ny, p.w_v)
    return _recalibrate(fbar_x, qx, ky, vy, p), _recalibrate(fbar_y, qy, kx, vx, p)


def attention_weights(fbar_s: Tensor, fbar_t: Tensor, p: ScamParams) -> np.ndarray:
    """Row-stochastic attention map of stream ``s`` over partner ``t`` (inspection only)."""
    ns = ops.layer_norm(fbar_s, p.ln1_gain, p.ln1_bias)
    nt = ops.layer_norm(fbar_t, p.ln1_gain, p.ln1_bias)
    scores = ops.matmul(ops.matmul(ns, p.w_q), _swap_last(ops.matmul(nt, p.w_k)))
    return ops.softmax(ops.scale(scores, 1.0 / math.sqrt(p.channels)), axis=-1).data


class SCAM(Module):
    """Token attachment, cross attention and token removal for both streams."""

    def __init__(self, channels: int, mlp_ratio: int, snr_range: tuple, interval: float, rng, dtype):
        self.tokens = QualityTokenBank(channels, snr_range[0], snr_range[1], interval, rng, dtype)
        self.params = ScamParams(channels, mlp_ratio * channels, rng, dtype)

    def __call__(self, fx: Tensor, fy: Tensor, snr_x, snr_y) -> tuple[Tensor, Tensor]:
        bx = attach_token(fx, self.tokens.lookup(snr_x))
        by = attach_token(fy, self.tokens.lookup(snr_y))
        hx, hy = scam_pair(bx, by, self.params)
        return detach_token(hx, *fx.shape[2:]), detach_token(hy, *fy.shape[2:])
