"""Run configuration and its flat ``key = value`` file format.

One file configures the model, the dataset and the training run. Blank
lines and ``#`` comments are ignored; every other line is ``key = value``.
Unknown keys, duplicate keys and values of the wrong type are errors.

=====================  ========  ============  ====================================
key                    type      default       meaning / range
=====================  ========  ============  ====================================
widths                 ints      32,64,64      encoder stage widths (3 values > 0)
kernels                ints      9,5,5         encoder stage kernels (odd)
bottleneck             int       8             channels after compression (> 0)
bottleneck_kernel      int       3             kernel of the (de)compression conv
scam_stages            ints      0,1           decoder stages with cross attention,
                                               subset of 0..2, ``none`` for baseline
mlp_ratio              int       4             attention MLP hidden multiplier
af_hidden              int       16            hidden units of the SNR gating MLP
token_interval         float     1.0           dB per quality token (> 0)
snr_lo / snr_hi        float     -3 / 14       SNR range (tokens and training)
power                  float     1.0           average power per symbol (> 0)
dtype                  str       float32       float32 or float64
loss                   str       mse           mse or ms_ssim
alpha                  float     1.0           weight of the y distortion (> 0)
lr                     float     1e-4          Adam learning rate (> 0)
batch_size             int       12            pairs per step (> 0)
iterations             int       1000          training steps (>= 0)
asymmetric             bool      false         y link always NOISELESS
noiseless_prob         float     0.0           per-item chance a link is NOISELESS
channel                str       awgn          awgn or rayleigh (training link)
seed                   int       0             parameter init seed
data_seed              int       0             dataset and batch sampling seed
noise_seed             int       0             channel noise and SNR draw seed
checkpoint_every       int       0             save cadence in steps (0 = end only)
log_every              int       100           loss log cadence
height / width         int       32 / 64       image size (multiples of 8)
train_count            int       1024          synthetic training pairs
test_count             int       64            synthetic test pairs
overlap                float     0.7           synthetic view overlap in [0, 1]
jitter                 float     0.05          photometric jitter amplitude
pixel_noise            float     0.01          per-view pixel noise std
data_dir               str       (none)        paired-image directory instead of synthetic
=====================  ========  ============  ====================================
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..data import DatasetSpec
from ..model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    loss: str = "mse"
    alpha: float = 1.0
    lr: float = 1e-4
    batch_size: int = 12
    iterations: int = 1000
    snr_lo: float = -3.0
    snr_hi: float = 14.0
    asymmetric: bool = False
    noiseless_prob: float = 0.0
    channel: str = "awgn"
    seed: int = 0
    data_seed: int = 0
    noise_seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.loss not in ("mse", "ms_ssim"):
            raise ConfigError(f"loss must be mse or ms_ssim, got {self.loss!r}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size <= 0 or self.iterations < 0:
            raise ConfigError("batch_size must be positive and iterations non-negative")
        if not self.snr_lo < self.snr_hi:
            raise ConfigError(f"SNR range needs snr_lo < snr_hi, got [{self.snr_lo}, {self.snr_hi}]")
        if not 0.0 <= self.noiseless_prob <= 1.0:
            raise ConfigError(f"noiseless_prob must lie in [0, 1], got {self.noiseless_prob}")
        if self.channel not in ("awgn", "rayleigh"):
            raise ConfigError(f"training channel must be awgn or rayleigh, got {self.channel!r}")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DatasetSpec = field(default_factory=DatasetSpec)
    test_count: int = 64

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "train": dataclasses.asdict(self.train),
                "data": dataclasses.asdict(self.data), "test_count": self.test_count}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(ModelConfig.from_dict(d["model"]), TrainConfig(**d["train"]),
                   DatasetSpec(**d["data"]), d.get("test_count", 64))

    def test_spec(self) -> DatasetSpec:
        return dataclasses.replace(self.data, count=self.test_count)


def _ints(text: str) -> tuple:
    if text.strip().lower() in ("none", ""):
        return ()
    return tuple(int(v) for v in text.split(","))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (section, field, parser)
_KEYS = {
    "widths": ("model", "widths", _ints),
    "kernels": ("model", "kernels", _ints),
    "bottleneck": ("model", "bottleneck", int),
    "bottleneck_kernel": ("model", "bottleneck_kernel", int),
    "scam_stages": ("model", "scam_stages", _ints),
    "mlp_ratio": ("model", "mlp_ratio", int),
    "af_hidden": ("model", "af_hidden", int),
    "token_interval": ("model", "token_interval", float),
    "power": ("model", "power", float),
    "dtype": ("model", "dtype", str),
    "loss": ("train", "loss", str),
    "alpha": ("train", "alpha", float),
    "lr": ("train", "lr", float),
    "batch_size": ("train", "batch_size", int),
    "iterations": ("train", "iterations", int),
    "asymmetric": ("train", "asymmetric", _bool),
    "noiseless_prob": ("train", "noiseless_prob", float),
    "channel": ("train", "channel", str),
    "seed": ("train", "seed", int),
    "data_seed": ("train", "data_seed", int),
    "noise_seed": ("train", "noise_seed", int),
    "checkpoint_every": ("train", "checkpoint_every", int),
    "log_every": ("train", "log_every", int),
    "height": ("data", "height", int),
    "width": ("data", "width", int),
    "train_count": ("data", "count", int),
    "overlap": ("data", "overlap", float),
    "jitter": ("data", "jitter", float),
    "pixel_noise": ("data", "pixel_noise", float),
    "data_dir": ("data", "directory", str),
    "test_count": ("run", "test_count", int),
    # shared by the token range and the training distribution
    "snr_lo": ("both", "snr_lo", float),
    "snr_hi": ("both", "snr_hi", float),
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, dict] = {"model": {}, "train": {}, "data": {}, "run": {}}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        section, name, parse = _KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        if section == "both":
            values["model"][name] = parsed
            values["train"][name] = parsed
        else:
            values[section][name] = parsed
    if values["data"].get("directory"):
        values["data"]["source"] = "directory"
    try:
        return RunConfig(ModelConfig(**values["model"]), TrainConfig(**values["train"]),
                         DatasetSpec(**values["data"]), **values["run"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
