"""Image I/O, bicubic resampling, patch sampling and PSNR.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from PIL import Image, UnidentifiedImageError

from .engine import Tensor

CUBIC_A = -0.5


class ImageError(ValueError):
    pass


@dataclass(frozen=True)
class PatchPair:
    hr: np.ndarray
    lr: np.ndarray
    scale: int
    y: int = 0
    x: int = 0


def as_image(arr) -> np.ndarray:
    """Validate/convert to a contiguous float32 HWC RGB image clamped to [0, 1]."""
    img = np.asarray(arr, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"image dimensions must be >= 1, got {img.shape[:2]}")
    return np.ascontiguousarray(np.clip(img, 0.0, 1.0))


_ACCEPTED_MODES = {"L": "RGB", "LA": "RGB", "P": "RGB", "RGB": "RGB", "RGBA": "RGB"}


def _png_bit_depth(path: Path) -> int:
    with open(path, "rb") as f:
        head = f.read(25)
    if len(head) < 25 or head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        return -1
    return head[24]


def load_png(path) -> np.ndarray:
    path = Path(path)
    depth = _png_bit_depth(path)
    if depth > 8:
        raise ImageError(f"{path}: unsupported PNG bit depth {depth}; only 8-bit images are read")
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise ImageError(f"{path}: not a PNG file (format {im.format})")
            if im.mode not in _ACCEPTED_MODES:
                raise ImageError(f"{path}: unsupported PNG mode {im.mode!r}; only 8-bit images are read")
            im.load()
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageError(f"{path}: cannot decode image ({exc})") from None
    return np.asarray(rgb, dtype=np.float32) / np.float32(255.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(img: np.ndarray, path) -> None:
    img = as_image(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    Image.fromarray(to_uint8(img), mode="RGB").save(tmp, format="PNG")
    tmp.replace(path)


def cubic_kernel(x, a: float = CUBIC_A) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """Dense (n_out, n_in) bicubic interpolation matrix.

    Output sample i sits at input coordinate (i + 0.5) * n_in / n_out - 0.5.
    When shrinking, the kernel is stretched by the scale factor (antialiased
    resampling). Taps falling outside the image are folded onto the nearest
    edge pixel, and every row is normalized to sum to one.
    """
    scale = n_in / n_out
    stretch = max(scale, 1.0)
    support = 2.0 * stretch
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) * scale - 0.5
        lo = int(math.floor(center - support))
        hi = int(math.ceil(center + support))
        taps = np.arange(lo, hi + 1)
        w = cubic_kernel((center - taps) / stretch)
        idx = np.clip(taps, 0, n_in - 1)
        np.add.at(mat[i], idx, w)
        mat[i] /= mat[i].sum()
    return mat


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    img = as_image(img)
    wy = resize_weights(img.shape[0], out_h)
    wx = resize_weights(img.shape[1], out_w)
    out = np.einsum("ij,jkc,lk->ilc", wy, img.astype(np.float64), wx, optimize=True)
    return np.ascontiguousarray(np.clip(out, 0.0, 1.0).astype(np.float32))


def bicubic_downsample(img: np.ndarray, s: int) -> np.ndarray:
    img = as_image(img)
    h, w = img.shape[:2]
    if s < 1 or h % s or w % s:
        raise ImageError(f"image {h}x{w} not divisible by scale factor {s}")
    return resize_bicubic(img, h // s, w // s)


def bicubic_upsample(img: np.ndarray, s: int) -> np.ndarray:
    img = as_image(img)
    return resize_bicubic(img, img.shape[0] * s, img.shape[1] * s)


def nearest_upsample(img: np.ndarray, s: int) -> np.ndarray:
    return np.repeat(np.repeat(as_image(img), s, axis=0), s, axis=1)


def sample_patches(img: np.ndarray, count: int, patch: int, s: int,
                   rng: np.random.Generator) -> List[PatchPair]:
    """Draw ``count`` uniformly placed patch x patch HR crops with their bicubic LR versions."""
    img = as_image(img)
    h, w = img.shape[:2]
    if patch % s:
        raise ImageError(f"patch size {patch} not divisible by scale {s}")
    if h < patch or w < patch:
        raise ImageError(f"image {h}x{w} smaller than patch size {patch}")
    pairs = []
    for _ in range(count):
        y = int(rng.integers(0, h - patch + 1))
        x = int(rng.integers(0, w - patch + 1))
        hr = img[y:y + patch, x:x + patch].copy()
        pairs.append(PatchPair(hr=hr, lr=bicubic_downsample(hr, s), scale=s, y=y, x=x))
    return pairs


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ImageError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; identical inputs give +inf."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def image_to_tensor(img: np.ndarray) -> Tensor:
    img = as_image(img)
    return Tensor(np.ascontiguousarray(img.transpose(2, 0, 1)[None]))


def images_to_tensor(imgs) -> Tensor:
    return Tensor(np.ascontiguousarray(np.stack([as_image(i) for i in imgs]).transpose(0, 3, 1, 2)))


def tensor_to_image(t) -> np.ndarray:
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if data.ndim == 4:
        if data.shape[0] != 1:
            raise ImageError(f"tensor_to_image expects batch size 1, got {data.shape[0]}")
        data = data[0]
    if data.ndim != 3 or data.shape[0] != 3:
        raise ImageError(f"expected a (3, H, W) tensor, got shape {data.shape}")
    return as_image(data.transpose(1, 2, 0))


def tensor_to_images(t) -> List[np.ndarray]:
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    return [as_image(d.transpose(1, 2, 0)) for d in data]
