"""Procedural image corpus used in place of a photographic dataset."""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np

from ..imaging import ImageError, load_png, save_png
from ..noise import make_rng


def _random_color(rng) -> np.ndarray:
    return rng.random(3)


def generate_image(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    c0, c1, c2 = _random_color(rng), _random_color(rng), _random_color(rng)
    img = c0 + (c1 - c0) * xx[..., None] * 0.8 + (c2 - c0) * yy[..., None] * 0.5
    img = np.clip(img, 0.0, 1.0)

    for _ in range(int(rng.integers(5, 11))):
        color = _random_color(rng)
        cy, cx = rng.random(2)
        ry, rx = 0.05 + 0.3 * rng.random(2)
        if rng.random() < 0.5:
            theta = np.pi * rng.random()
            dy, dx = yy - cy, xx - cx
            u = dx * np.cos(theta) + dy * np.sin(theta)
            v = -dx * np.sin(theta) + dy * np.cos(theta)
            mask = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        if rng.random() < 0.4:
            # striped fill: sinusoidal texture inside the shape
            freq = 2.0 + 8.0 * rng.random()
            phi = np.pi * rng.random()
            wave = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (xx * np.cos(phi) + yy * np.sin(phi)))
            fill = color * wave[..., None] + _random_color(rng) * (1 - wave[..., None])
            img = np.where(mask[..., None], fill, img)
        else:
            img = np.where(mask[..., None], color, img)

    # faint global texture so flat regions still carry some high-frequency content
    freq = 2.0 + 6.0 * rng.random(2)
    tex = np.sin(2 * np.pi * freq[0] * xx + 6.28 * rng.random()) * np.sin(2 * np.pi * freq[1] * yy)
    img = img + 0.05 * tex[..., None]
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def generate_corpus(n: int, size: int, seed: int, scale: int = 2) -> List[np.ndarray]:
    """``n`` deterministic synthetic RGB images of ``size`` x ``size`` pixels."""
    if n < 0:
        raise ValueError(f"corpus size must be >= 0, got {n}")
    if size < 8 or size % (2 * scale) or size % 8:
        raise ValueError(f"image size {size} must be divisible by 2*scale={2 * scale} and by 8")
    return [generate_image(size, make_rng(seed, i)) for i in range(n)]


def save_corpus(images, directory, prefix: str = "img") -> List[Path]:
    directory = Path(directory)
    paths = []
    for i, img in enumerate(images):
        p = directory / f"{prefix}{i:04d}.png"
        save_png(img, p)
        paths.append(p)
    return paths


def load_directory(directory) -> List[np.ndarray]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageError(f"{directory}: not a directory")
    files = sorted(directory.glob("*.png"))
    if not files:
        raise ImageError(f"{directory}: no PNG images found")
    return [load_png(f) for f in files]
