"""Evaluation sweeps and the CSV report they produce.

Report schema: a header line ``mu_x,mu_y,channel,source,psnr_db,ms_ssim,n``
followed by one line per (mu_x, mu_y, channel, source) cell. SNRs are
written as numbers or ``noiseless``. Lines starting with ``#`` are remarks
(for example SNRs clamped by the token rule) and carry no data.
"""

from __future__ import annotations

import io
import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..channel import NOISELESS, is_noiseless
from ..metrics import ms_ssim, psnr
from ..model import JointModel

HEADER = ("mu_x", "mu_y", "channel", "source", "psnr_db", "ms_ssim", "n")


@dataclass(frozen=True)
class EvalRow:
    mu_x: float
    mu_y: float
    channel: str
    source: str
    psnr_db: float
    ms_ssim: float
    n: int


def _fmt_snr(mu: float) -> str:
    return "noiseless" if is_noiseless(mu) else f"{mu:g}"


def _parse_snr(text: str) -> float:
    return NOISELESS if text == "noiseless" else float(text)


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    remarks: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        for r in self.remarks:
            out.write(f"# {r}\n")
        out.write(",".join(HEADER) + "\n")
        for r in self.rows:
            out.write(f"{_fmt_snr(r.mu_x)},{_fmt_snr(r.mu_y)},{r.channel},{r.source},"
                      f"{r.psnr_db:.6f},{r.ms_ssim:.6f},{r.n}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        rep = cls()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        data = []
        for ln in lines:
            if ln.startswith("#"):
                rep.remarks.append(ln[1:].strip())
            else:
                data.append(ln)
        if not data or tuple(data[0].split(",")) != HEADER:
            raise ValueError(f"report header must be {','.join(HEADER)!r}")
        for ln in data[1:]:
            f = ln.split(",")
            if len(f) != len(HEADER):
                raise ValueError(f"malformed report row {ln!r}")
            row = EvalRow(_parse_snr(f[0]), _parse_snr(f[1]), f[2], f[3], float(f[4]), float(f[5]), int(f[6]))
            if not (math.isfinite(row.psnr_db) and math.isfinite(row.ms_ssim)):
                raise ValueError(f"non-finite metric in row {ln!r}")
            rep.rows.append(row)
        return rep

    def lookup(self, mu_x: float, mu_y: float, source: str = "x", channel: str = None) -> EvalRow:
        for r in self.rows:
            if r.mu_x == mu_x and r.mu_y == mu_y and r.source == source and \
                    (channel is None or r.channel == channel):
                return r
        raise KeyError((mu_x, mu_y, source, channel))


def cell_seed(seed: int, mu_x: float, mu_y: float, kind: str) -> list[int]:
    """Noise seed for one report cell, independent of where the cell sits in a sweep."""
    key = f"{_fmt_snr(mu_x)}|{_fmt_snr(mu_y)}|{kind}".encode()
    return [seed, zlib.crc32(key)]


def evaluate_cell(model: JointModel, x: np.ndarray, y: np.ndarray, mu_x: float, mu_y: float,
                  kind: str, seed: int, batch: int = 16) -> dict[str, tuple[float, float]]:
    """Mean PSNR and MS-SSIM of both reconstructions at one SNR pair."""
    rng = np.random.default_rng(cell_seed(seed, mu_x, mu_y, kind))
    dt = np.dtype(model.config.dtype)
    scores = {"x": ([], []), "y": ([], [])}
    for lo in range(0, len(x), batch):
        xb, yb = x[lo:lo + batch].astype(dt), y[lo:lo + batch].astype(dt)
        n = len(xb)
        x_hat, y_hat = model(xb, yb, np.full(n, mu_x), np.full(n, mu_y), rng, kind)
        for src, ref, rec in (("x", xb, x_hat.data), ("y", yb, y_hat.data)):
            scores[src][0].extend(np.atleast_1d(psnr(ref, rec)))
            scores[src][1].extend(np.atleast_1d(ms_ssim(ref.astype(np.float64), rec.astype(np.float64)).data))
    return {s: (float(np.mean(p)), float(np.mean(m))) for s, (p, m) in scores.items()}


def _clamp_remarks(model: JointModel, mus: Sequence[float]) -> list[str]:
    cfg = model.config
    out = []
    for mu in mus:
        if not is_noiseless(mu) and not cfg.snr_lo <= mu <= cfg.snr_hi:
            out.append(f"warning: snr {mu:g} dB outside token range [{cfg.snr_lo:g}, {cfg.snr_hi:g}]; "
                       f"token clamped")
    return out


def evaluate_sweep(model: JointModel, x: np.ndarray, y: np.ndarray, snrs: Sequence[float],
                   kind: str = "awgn", seed: int = 0, batch: int = 16) -> EvalReport:
    """Both links at the same SNR, one row per SNR per source."""
    rep = EvalReport(remarks=_clamp_remarks(model, snrs))
    for mu in snrs:
        res = evaluate_cell(model, x, y, mu, mu, kind, seed, batch)
        for src in ("x", "y"):
            rep.rows.append(EvalRow(mu, mu, kind, src, res[src][0], res[src][1], len(x)))
    return rep


def evaluate_delta_sweep(model: JointModel, x: np.ndarray, y: np.ndarray, snr_x: float,
                         deltas: Sequence[float], kind: str = "awgn", seed: int = 0,
                         batch: int = 16) -> EvalReport:
    """Fix the x link, move the y link to ``snr_x + delta``; x-side rows only.

    A delta of ``NOISELESS`` makes y lossless side information.
    """
    mus_y = [NOISELESS if is_noiseless(d) else snr_x + d for d in deltas]
    rep = EvalReport(remarks=_clamp_remarks(model, [snr_x] + mus_y))
    for mu_y in mus_y:
        res = evaluate_cell(model, x, y, snr_x, mu_y, kind, seed, batch)
        rep.rows.append(EvalRow(snr_x, mu_y, kind, "x", res["x"][0], res["x"][1], len(x)))
    return rep
