"""Side-by-side comparison plates of reconstructions."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..imaging import ImageError, as_image, nearest_upsample, save_png

GUTTER = 4
LABEL_HEIGHT = 12


def panel_offsets(n: int, width: int, gutter: int = GUTTER) -> List[int]:
    return [i * (width + gutter) for i in range(n)]


def _label_strip(labels: Sequence[str], width: int, total: int, gutter: int) -> np.ndarray:
    strip = Image.new("RGB", (total, LABEL_HEIGHT), (255, 255, 255))
    draw = ImageDraw.Draw(strip)
    font = ImageFont.load_default()
    for x0, text in zip(panel_offsets(len(labels), width, gutter), labels):
        draw.text((x0 + 1, 0), text, fill=(0, 0, 0), font=font)
    return np.asarray(strip, dtype=np.float32) / 255.0


def compose(panels: Sequence[Tuple[str, np.ndarray]], gutter: int = GUTTER) -> np.ndarray:
    """Lay labeled, equal-size panels out left to right.

    Width is ``n * panel_width + (n - 1) * gutter``; a label strip of
    ``LABEL_HEIGHT`` rows sits above the panels.
    """
    if not panels:
        raise ImageError("montage needs at least one panel")
    imgs = [as_image(p) for _, p in panels]
    h, w = imgs[0].shape[:2]
    for (label, _), img in zip(panels, imgs):
        if img.shape[:2] != (h, w):
            raise ImageError(f"panel {label!r} is {img.shape[:2]}, expected {(h, w)}")
    n = len(imgs)
    total = n * w + (n - 1) * gutter
    canvas = np.ones((LABEL_HEIGHT + h, total, 3), dtype=np.float32)
    canvas[:LABEL_HEIGHT] = _label_strip([label for label, _ in panels], w, total, gutter)
    for x0, img in zip(panel_offsets(n, w, gutter), imgs):
        canvas[LABEL_HEIGHT:, x0:x0 + w] = img
    return canvas


def emit_montage(clean: np.ndarray, noisy_input: np.ndarray,
                 reconstructions: Sequence[Tuple[str, np.ndarray]], path=None) -> np.ndarray:
    """Original | input (nearest-upsampled) | each reconstruction; optionally saved as PNG."""
    clean = as_image(clean)
    noisy = as_image(noisy_input)
    if clean.shape[0] % noisy.shape[0] or clean.shape[0] // noisy.shape[0] != clean.shape[1] // noisy.shape[1]:
        raise ImageError(f"input {noisy.shape[:2]} is not an integer downscale of {clean.shape[:2]}")
    up = nearest_upsample(noisy, clean.shape[0] // noisy.shape[0])
    plate = compose([("Original", clean), ("Input", up), *reconstructions])
    if path is not None:
        save_png(plate, path)
    return plate


def write_eval_montages(outputs_dir, dest) -> List[Path]:
    """One plate per (validation image, test noise) from persisted evaluation outputs."""
    root = Path(outputs_dir)
    index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    hr = sorted((root / "hr").glob("*.npy"))
    by_noise = {}
    for entry in index:
        by_noise.setdefault(entry["noise"], []).append(entry)
    written = []
    for noise, entries in by_noise.items():
        tag = noise.replace(":", "_")
        for i, hr_path in enumerate(hr):
            recon = [(e["model"], np.load(root / e["dir"] / hr_path.name)) for e in entries]
            path = Path(dest) / f"{hr_path.stem}-{tag}.png"
            emit_montage(np.load(hr_path), np.load(root / "input" / tag / hr_path.name), recon, path)
            written.append(path)
    return written
