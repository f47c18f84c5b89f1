"""Correlated stereo-pair supply.

Synthetic pairs are two horizontally shifted crops of one procedural scene;
the shift sets how many pixel columns the views share. Real pairs are read
from a directory and put through the center-crop / bilinear-resize
preprocessing.

Directory layouts understood by :func:`load_pairs`:

* ``suffix``: files named ``<id>_left.<ext>`` and ``<id>_right.<ext>`` in
  one directory;
* ``subdirs``: ``left/<name>`` and ``right/<name>`` with matching names.

The fixture format is binary PPM (P6, 8 bit), which round-trips exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .model.codec import check_extents

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".ppm", ".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")

# Test pairs are drawn from seeds offset by this much from training seeds.
TEST_SEED_OFFSET = 1_000_000


@dataclass
class StereoPair:
    x: np.ndarray
    y: np.ndarray
    pair_id: str
    overlap: Optional[float] = None

    def __post_init__(self):
        if self.x.shape != self.y.shape or self.x.ndim != 3 or self.x.shape[0] != 3:
            raise ValueError(f"pair views must both be [3,H,W], got {self.x.shape} / {self.y.shape}")
        self.x = np.clip(self.x, 0.0, 1.0)
        self.y = np.clip(self.y, 0.0, 1.0)


@dataclass
class DatasetSpec:
    source: str = "synthetic"
    height: int = 32
    width: int = 64
    count: int = 1024
    seed: int = 0
    overlap: float = 0.7
    jitter: float = 0.05
    pixel_noise: float = 0.01
    directory: Optional[str] = None
    layout: str = "auto"

    def __post_init__(self):
        if self.source not in ("synthetic", "directory"):
            raise ValueError(f"unknown dataset source {self.source!r}")
        check_extents(self.height, self.width)
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")


# ------------------------------------------------------------------ synthetic

def shift_for_overlap(overlap: float, width: int) -> int:
    """Horizontal offset (columns) between views sharing ``overlap * width`` columns."""
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return width - int(round(overlap * width))


def render_scene(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """A ``[3, height, width]`` procedural image in [0, 1].

    Multi-octave smoothed noise under a random colour mix, overlaid with
    random rectangles and discs.
    """
    img = np.zeros((3, height, width))
    amp = 1.0
    cell = max(height // 4, 2)
    while cell >= 2:
        gh, gw = -(-height // cell) + 1, -(-width // cell) + 1
        coarse = rng.standard_normal((3, gh, gw))
        fine = ndimage.zoom(coarse, (1, cell, cell), order=1)[:, :height, :width]
        img += amp * fine
        amp *= 0.5
        cell //= 2
    mix = rng.uniform(0.2, 1.0, size=(3, 3)) * rng.choice([-1.0, 1.0], size=(3, 3))
    img = np.tensordot(mix, img, axes=1) / 3.0
    img = 0.5 + 0.18 * img / (img.std() + 1e-8)

    yy, xx = np.mgrid[0:height, 0:width]
    n_shapes = rng.integers(3, 9) * max(1, width // 64)
    for _ in range(n_shapes):
        colour = rng.uniform(0.0, 1.0, size=3)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        size = rng.uniform(0.08, 0.3) * height
        if rng.random() < 0.5:
            mask = (np.abs(yy - cy) < size) & (np.abs(xx - cx) < size * rng.uniform(0.5, 2.0))
        else:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < size ** 2
        img[:, mask] = colour[:, None]
    return np.clip(img, 0.0, 1.0)


def _photometric(view: np.ndarray, rng: np.random.Generator, jitter: float, noise: float) -> np.ndarray:
    out = view
    if jitter > 0:
        contrast = 1.0 + rng.uniform(-jitter, jitter)
        brightness = rng.uniform(-jitter, jitter)
        out = (out - 0.5) * contrast + 0.5 + brightness
    if noise > 0:
        out = out + noise * rng.standard_normal(out.shape)
    return np.clip(out, 0.0, 1.0)


def generate_pair(seed: int, overlap: float, height: int, width: int,
                  jitter: float = 0.05, pixel_noise: float = 0.01) -> StereoPair:
    """Render one scene and cut two views sharing ``overlap`` of their columns.

    ``x`` is the left crop; ``y`` starts ``shift_for_overlap`` columns to the
    right, so the right part of ``x`` equals the left part of ``y`` before
    the independent per-view jitter and noise.
    """
    shift = shift_for_overlap(overlap, width)
    rng = np.random.default_rng(seed)
    canvas = render_scene(rng, height, width + shift)
    x = canvas[:, :, :width]
    y = canvas[:, :, shift:shift + width]
    x = _photometric(x, rng, jitter, pixel_noise)
    y = _photometric(y, rng, jitter, pixel_noise)
    return StereoPair(x.astype(np.float32), y.astype(np.float32), f"syn{seed}",
                      overlap=(width - shift) / width)


def synthetic_pairs(spec: DatasetSpec, split: str = "train") -> list[StereoPair]:
    base = spec.seed + (TEST_SEED_OFFSET if split == "test" else 0)
    return [generate_pair(base + i, spec.overlap, spec.height, spec.width,
                          spec.jitter, spec.pixel_noise) for i in range(spec.count)]


def stack(pairs: Sequence[StereoPair]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([p.x for p in pairs]), np.stack([p.y for p in pairs])


# ------------------------------------------------------------------ real data

def read_image(path) -> np.ndarray:
    """Decode an image file into ``[3, H, W]`` float32 in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from exc
    return (arr.astype(np.float32) / 255.0).transpose(2, 0, 1)


def write_image(path, img: np.ndarray) -> None:
    """Write ``[3, H, W]`` in [0, 1] as 8-bit RGB (format from the suffix)."""
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr, mode="RGB").save(path)


def quantize(img: np.ndarray) -> np.ndarray:
    """What an 8-bit write followed by a read gives back."""
    return (np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def _pair_names(root: Path, layout: str) -> tuple[list[tuple[str, Path, Path]], int]:
    if layout == "auto":
        layout = "subdirs" if (root / "left").is_dir() and (root / "right").is_dir() else "suffix"
    orphans = 0
    pairs = []
    if layout == "subdirs":
        left = {p.name: p for p in (root / "left").iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
        right = {p.name: p for p in (root / "right").iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
        for name in sorted(left.keys() | right.keys()):
            if name in left and name in right:
                pairs.append((Path(name).stem, left[name], right[name]))
            else:
                orphans += 1
    elif layout == "suffix":
        left, right = {}, {}
        for p in root.iterdir():
            if p.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            stem = p.stem
            if stem.endswith("_left"):
                left[stem[:-5]] = p
            elif stem.endswith("_right"):
                right[stem[:-6]] = p
            else:
                orphans += 1
        for key in sorted(left.keys() | right.keys()):
            if key in left and key in right:
                pairs.append((key, left[key], right[key]))
            else:
                orphans += 1
    else:
        raise ValueError(f"unknown directory layout {layout!r}")
    return pairs, orphans


class PairDirectory:
    """Paired images on disk; ``skipped`` counts files without a partner."""

    def __init__(self, directory, layout: str = "auto", height: Optional[int] = None,
                 width: Optional[int] = None):
        self.root = Path(directory)
        if not self.root.is_dir():
            raise FileNotFoundError(f"no such directory: {self.root}")
        self.entries, self.skipped = _pair_names(self.root, layout)
        if self.skipped:
            logger.warning("%s: skipped %d unpaired file(s)", self.root, self.skipped)
        self.height, self.width = height, width

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[StereoPair]:
        for key, lp, rp in self.entries:
            x, y = read_image(lp), read_image(rp)
            if self.height is not None:
                x = center_crop_resize(x, self.height, self.width)
                y = center_crop_resize(y, self.height, self.width)
            yield StereoPair(x, y, key)


def load_pairs(directory, layout: str = "auto", height: Optional[int] = None,
               width: Optional[int] = None) -> tuple[list[StereoPair], int]:
    """All pairs in ``directory`` sorted by name, plus the number of skipped files."""
    d = PairDirectory(directory, layout, height, width)
    return list(d), d.skipped


def save_pairs(pairs: Sequence[StereoPair], directory, suffix: str = ".ppm") -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for p in pairs:
        write_image(root / f"{p.pair_id}_left{suffix}", p.x)
        write_image(root / f"{p.pair_id}_right{suffix}", p.y)


# ------------------------------------------------------------------ preprocess

def bilinear_resize(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Half-pixel-centred bilinear resampling of ``[C, H, W]``."""
    _, h, w = img.shape

    def coords(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = coords(height, h)
    x0, x1, fx = coords(width, w)
    rows = img[:, y0, :] * (1 - fy)[None, :, None] + img[:, y1, :] * fy[None, :, None]
    return rows[:, :, x0] * (1 - fx) + rows[:, :, x1] * fx


def center_crop_resize(img: np.ndarray, height: int = 128, width: int = 256) -> np.ndarray:
    """Crop the centre to the target aspect ratio, then resize bilinearly."""
    _, h, w = img.shape
    if h * width > w * height:
        ch, cw = max(1, int(round(w * height / width))), w
    else:
        ch, cw = h, max(1, int(round(h * width / height)))
    top, left = (h - ch) // 2, (w - cw) // 2
    crop = img[:, top:top + ch, left:left + cw]
    if crop.shape[1:] == (height, width):
        out = crop
    else:
        out = bilinear_resize(crop, height, width)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
