"""Median filter, locally adaptive Wiener filter and a convolutional denoising
autoencoder, all callable on (H, W, 3) float images.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .engine import (
    AdamState,
    CheckpointError,
    Tensor,
    WNConv2d,
    adam_step,
    backward,
    load_arrays,
    max_pool2,
    mse_loss,
    nearest_upsample2,
    no_grad,
    relu,
    save_arrays,
)
from .imaging import as_image, images_to_tensor, tensor_to_images

logger = logging.getLogger(__name__)

DENOISER_KINDS = ("identity", "median", "wiener", "dae")
DAE_ENCODER = (64, 128, 256)
DAE_KERNEL = 5


class DenoiserError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str = "identity"
    window: int = 5
    dae_checkpoint: Optional[str] = None

    def __post_init__(self):
        if self.kind not in DENOISER_KINDS:
            raise DenoiserError(f"unknown denoiser {self.kind!r}; expected one of {DENOISER_KINDS}")
        if self.window < 3 or self.window % 2 == 0:
            raise DenoiserError(f"window must be odd and >= 3, got {self.window}")


def _check_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise DenoiserError(f"window side length must be odd, got {window}")


def median_filter(img: np.ndarray, window: int = 5) -> np.ndarray:
    """Per-channel median over a window x window neighbourhood.

    Borders are mirrored without repeating the edge pixel (numpy's
    ``reflect`` padding, scipy's ``mirror`` mode).
    """
    _check_window(window)
    img = as_image(img)
    out = ndimage.median_filter(img, size=(window, window, 1), mode="mirror")
    return np.ascontiguousarray(out, dtype=np.float32)


def wiener_local_stats(img: np.ndarray, window: int) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(img, dtype=np.float64)
    size = (window, window, 1)
    mean = ndimage.uniform_filter(x, size=size, mode="mirror")
    sq = ndimage.uniform_filter(x * x, size=size, mode="mirror")
    return mean, np.maximum(sq - mean * mean, 0.0)


def wiener_filter(img: np.ndarray, window: int = 5) -> np.ndarray:
    """Locally adaptive Wiener filter with the noise power estimated from the image.

    Per channel: the noise power is the average local variance, and each pixel
    is pulled towards its local mean by gain max(var - noise, 0) / max(var, noise).
    """
    _check_window(window)
    img = as_image(img)
    mean, var = wiener_local_stats(img, window)
    noise = var.mean(axis=(0, 1), keepdims=True)
    denom = np.maximum(var, noise)
    gain = np.divide(np.maximum(var - noise, 0.0), denom, out=np.zeros_like(var), where=denom > 0)
    out = mean + gain * (img.astype(np.float64) - mean)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


class DaeModel:
    """Fully convolutional denoising autoencoder.

    Encoder: three 5x5 convs (3->64->128->256), each followed by ReLU and
    2x2 max-pooling. Decoder mirrors it with nearest 2x upsampling + 5x5
    conv (256->128->64->3), ReLU between stages and a linear output.
    """

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        chans = (3,) + DAE_ENCODER
        self.encoder = [WNConv2d(f"dae.enc{i}", chans[i], chans[i + 1], DAE_KERNEL, rng)
                        for i in range(3)]
        rev = chans[::-1]
        self.decoder = [WNConv2d(f"dae.dec{i}", rev[i], rev[i + 1], DAE_KERNEL, rng)
                        for i in range(3)]

    @property
    def layers(self) -> List[WNConv2d]:
        return self.encoder + self.decoder

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def freeze(self) -> "DaeModel":
        for p in self.parameters():
            p.frozen = True
        return self

    def fingerprint(self) -> List[list]:
        return [[p.name, list(p.shape)] for p in self.parameters()]

    def state_dict(self):
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, arrays) -> None:
        params = self.parameters()
        names = {p.name for p in params}
        if set(arrays) != names:
            raise CheckpointError(
                f"DAE parameter names differ: missing {sorted(names - set(arrays))}, "
                f"unexpected {sorted(set(arrays) - names)}"
            )
        for p in params:
            if arrays[p.name].shape != p.shape:
                raise CheckpointError(f"{p.name}: shape {arrays[p.name].shape} != {p.shape}")
            p.data = np.array(arrays[p.name], dtype=np.float32)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[2] % 8 or x.shape[3] % 8:
            raise DenoiserError(f"DAE input spatial dims must be multiples of 8, got {x.shape[2:]}")
        h = x
        for conv in self.encoder:
            h = max_pool2(relu(conv(h)))
        for i, conv in enumerate(self.decoder):
            h = conv(nearest_upsample2(h))
            if i < len(self.decoder) - 1:
                h = relu(h)
        return h


def dae_parameter_count() -> int:
    chans = (3,) + DAE_ENCODER
    total = 0
    for pairs in (zip(chans[:-1], chans[1:]), zip(chans[::-1][:-1], chans[::-1][1:])):
        for cin, cout in pairs:
            total += cout * cin * DAE_KERNEL ** 2 + 2 * cout
    return total


def save_dae(model: DaeModel, path) -> None:
    save_arrays(path, model.state_dict(), meta={"arch": "dae", "fingerprint": model.fingerprint()})


def load_dae(path) -> DaeModel:
    arrays, meta = load_arrays(path)
    model = DaeModel()
    if meta.get("arch") != "dae" or meta.get("fingerprint") != model.fingerprint():
        raise CheckpointError(f"{path}: architecture fingerprint does not match the DAE layout")
    model.load_state_dict(arrays)
    return model


def _pad_to_multiple(imgs: np.ndarray, m: int) -> np.ndarray:
    h, w = imgs.shape[1:3]
    ph, pw = (-h) % m, (-w) % m
    if ph == 0 and pw == 0:
        return imgs
    return np.pad(imgs, ((0, 0), (0, ph), (0, pw), (0, 0)), mode="reflect")


def dae_forward_batch(model: DaeModel, imgs: Sequence[np.ndarray]) -> List[np.ndarray]:
    stack = np.stack([as_image(i) for i in imgs])
    h, w = stack.shape[1:3]
    padded = _pad_to_multiple(stack, 8)
    with no_grad():
        out = model(images_to_tensor(padded))
    return [o[:h, :w].copy() for o in tensor_to_images(out)]


def dae_forward(model: DaeModel, img: np.ndarray) -> np.ndarray:
    """Denoise one image; non-multiple-of-8 sizes are reflect-padded then cropped."""
    return dae_forward_batch(model, [img])[0]


BatchFn = Callable[[int], Tuple[np.ndarray, np.ndarray]]


def train_dae(model: DaeModel, data, epochs: int, lr: float = 1e-4, batch_size: int = 8,
              steps_per_epoch: Optional[int] = None, seed: int = 0,
              log: Optional[Callable[[dict], None]] = None) -> List[dict]:
    """Fit the DAE with MSE loss and Adam.

    ``data`` is either a sequence of ``(noisy, clean)`` image pairs, reshuffled
    every epoch, or a callable ``step -> (noisy_batch, clean_batch)`` returning
    NHWC arrays. Returns one log record per epoch.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if callable(data):
        batch_fn: BatchFn = data
        if steps_per_epoch is None:
            raise ValueError("steps_per_epoch is required when data is a callable")
    else:
        pairs = list(data)
        if not pairs:
            raise ValueError("train_dae needs at least one (noisy, clean) pair")
        order_rng = np.random.default_rng(seed)
        if steps_per_epoch is None:
            steps_per_epoch = math.ceil(len(pairs) / batch_size)
        queue: List[int] = []

        def batch_fn(step: int):
            while len(queue) < batch_size:
                queue.extend(order_rng.permutation(len(pairs)).tolist())
            idx = [queue.pop(0) for _ in range(min(batch_size, len(pairs)))]
            return (np.stack([pairs[i][0] for i in idx]), np.stack([pairs[i][1] for i in idx]))

    params = [p for p in model.parameters() if not p.frozen]
    state = AdamState(lr=lr)
    history = []
    step = 0
    for epoch in range(epochs):
        losses = []
        for _ in range(steps_per_epoch):
            noisy, clean = batch_fn(step)
            try:
                pred = model(images_to_tensor(_pad_to_multiple(noisy, 8)))
                loss = mse_loss(pred, images_to_tensor(_pad_to_multiple(clean, 8)))
            except FloatingPointError as exc:
                raise TrainingError(f"DAE training diverged at epoch {epoch}, step {step}: {exc}") from None
            backward(loss)
            adam_step(params, state)
            losses.append(loss.item())
            step += 1
        rec = {"epoch": epoch, "steps": step, "loss": float(np.mean(losses))}
        history.append(rec)
        logger.info("dae epoch %d loss %.6f", epoch, rec["loss"])
        if log is not None:
            log(rec)
    return history


class Denoiser:
    """Callable wrapper around a :class:`DenoiserSpec` (loads the DAE once)."""

    def __init__(self, spec: DenoiserSpec, dae: Optional[DaeModel] = None):
        self.spec = spec
        self.dae = dae
        if spec.kind == "dae" and dae is None:
            if not spec.dae_checkpoint:
                raise DenoiserError("dae denoiser needs a checkpoint path or a trained model")
            try:
                self.dae = load_dae(spec.dae_checkpoint)
            except OSError as exc:
                raise DenoiserError(f"cannot load DAE checkpoint {spec.dae_checkpoint}: {exc}") from None
        if self.dae is not None:
            self.dae.freeze()

    def __call__(self, img: np.ndarray) -> np.ndarray:
        return self.batch([img])[0]

    def batch(self, imgs: Sequence[np.ndarray]) -> List[np.ndarray]:
        kind = self.spec.kind
        if kind == "identity":
            return [as_image(i) for i in imgs]
        if kind == "median":
            return [median_filter(i, self.spec.window) for i in imgs]
        if kind == "wiener":
            return [wiener_filter(i, self.spec.window) for i in imgs]
        return dae_forward_batch(self.dae, imgs)


@functools.lru_cache(maxsize=8)
def _cached(spec: DenoiserSpec, mtime: float) -> Denoiser:
    return Denoiser(spec)


def apply(spec: DenoiserSpec, img: np.ndarray) -> np.ndarray:
    """Run the denoiser described by ``spec`` on one image."""
    if spec.kind == "identity":
        return as_image(img)
    mtime = 0.0
    if spec.kind == "dae" and spec.dae_checkpoint:
        try:
            mtime = Path(spec.dae_checkpoint).stat().st_mtime
        except OSError as exc:
            raise DenoiserError(f"cannot load DAE checkpoint {spec.dae_checkpoint}: {exc}") from None
    return _cached(spec, mtime)(img)
