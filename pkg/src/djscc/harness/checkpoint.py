"""Versioned binary checkpoint container.

Byte layout (all integers unsigned 32-bit little-endian)::

    magic      8 bytes   b"DJSCCKPT"
    version    u32       FORMAT_VERSION
    header_len u32
    header     JSON, UTF-8, sorted keys, no whitespace:
                 {"config": RunConfig dict, "iteration": int,
                  "adam_step": int or null, "seeds": {...}}
    count      u32       number of tensors
    per tensor:
      name_len u32, name (UTF-8)
      ndim     u32, dims (ndim x u32)
      data     prod(dims) little-endian float32

Model parameters are stored under their module path (``enc_x.blocks.0.kernel``),
Adam moments under ``adam.m/<name>`` and ``adam.v/<name>``. Writing the same
state twice gives identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..model import JointModel, ModelConfig
from ..ndgrad import AdamState
from .config import RunConfig

MAGIC = b"DJSCCKPT"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointConfigError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    model: JointModel
    iteration: int
    adam: Optional[AdamState]


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def _tensor_bytes(name: str, arr: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    parts = [_u32(len(encoded)), encoded, _u32(arr.ndim)]
    parts += [_u32(d) for d in arr.shape]
    parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def encode_checkpoint(config: RunConfig, model: JointModel, iteration: int,
                      adam: Optional[AdamState] = None) -> bytes:
    params = model.named_parameters()
    tensors = [(name, p.data) for name, p in params.items()]
    if adam is not None:
        adam.ensure(params)
        tensors += [(f"adam.m/{n}", adam.m[n]) for n in params]
        tensors += [(f"adam.v/{n}", adam.v[n]) for n in params]
    t = config.train
    header = {
        "config": config.to_dict(),
        "iteration": int(iteration),
        "adam_step": None if adam is None else int(adam.step),
        "seeds": {"seed": t.seed, "data_seed": t.data_seed, "noise_seed": t.noise_seed},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(_tensor_bytes(n, a) for n, a in tensors)
    return b"".join([MAGIC, _u32(FORMAT_VERSION), _u32(len(head)), head, _u32(len(tensors)), body])


def save_checkpoint(path, config: RunConfig, model: JointModel, iteration: int,
                    adam: Optional[AdamState] = None) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_suffix(p.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(config, model, iteration, adam))
    tmp.replace(p)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointTruncatedError(
                f"checkpoint truncated: wanted {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode_checkpoint(buf: bytes, expected: Optional[ModelConfig] = None) -> Checkpoint:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    header = json.loads(r.take(r.u32()).decode("utf-8"))
    config = RunConfig.from_dict(header["config"])
    if expected is not None and config.model != expected:
        raise CheckpointConfigError(
            f"checkpoint model config {config.model.to_dict()} does not match {expected.to_dict()}")
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        n = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after the last tensor")

    model = JointModel(config.model, seed=config.train.seed)
    params = model.named_parameters()
    missing = params.keys() - tensors.keys()
    if missing:
        raise CheckpointConfigError(f"checkpoint lacks parameters {sorted(missing)[:5]}")
    dtype = np.dtype(config.model.dtype)
    for name, p in params.items():
        arr = tensors[name]
        if arr.shape != p.shape:
            raise CheckpointConfigError(f"parameter {name}: stored {arr.shape}, model {p.shape}")
        p.data = arr.astype(dtype)
    adam = None
    if header["adam_step"] is not None:
        adam = AdamState(step=header["adam_step"])
        for name in params:
            adam.m[name] = tensors[f"adam.m/{name}"].astype(dtype)
            adam.v[name] = tensors[f"adam.v/{name}"].astype(dtype)
    return Checkpoint(config, model, header["iteration"], adam)


def load_checkpoint(path, expected: Optional[ModelConfig] = None) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes(), expected)
