"""WDSR-style super-resolution network and its two denoiser compositions.

``baseline``  both paths see the input.
``pre_net``   the input is denoised first, then fed to both paths.
``in_net``    the main path sees the noisy input, the skip path the denoised one.

Denoisers run at image level, outside the gradient tape.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import engine as E
from .denoisers import DaeModel, Denoiser, DenoiserSpec
from .engine import CheckpointError, Parameter, Tensor, WNConv2d
from .imaging import as_image, images_to_tensor, tensor_to_images

VARIANTS = ("baseline", "pre_net", "in_net")
SKIP_KERNEL = 5
MODEL_FORMAT = "nsrkit-sr/1"
TAIL_INIT_SCALE = 0.1
SKIP_INIT_JITTER = 0.01


def _init_as_upsampler(conv: WNConv2d, r: int) -> None:
    """Add a unit centre tap so the skip path starts as nearest-neighbour upsampling."""
    v = conv.v.data.astype(np.float64)
    c = conv.k // 2
    for ch in range(3):
        for k in range(r * r):
            v[ch * r * r + k, ch, c, c] += 1.0
    conv.v.data = v.astype(np.float32)
    conv.g.data = np.sqrt((v.reshape(v.shape[0], -1) ** 2).sum(axis=1)).astype(np.float32)


@dataclass(frozen=True)
class SrConfig:
    scale: int = 2
    blocks: int = 2
    filters: int = 16
    expansion: int = 4
    variant: str = "baseline"
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)
    rgb_mean: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("scale", "blocks", "filters", "expansion"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if len(self.rgb_mean) != 3:
            raise ValueError("rgb_mean needs three values")
        object.__setattr__(self, "rgb_mean", tuple(float(c) for c in self.rgb_mean))
        if self.variant == "baseline" and self.denoiser.kind != "identity":
            object.__setattr__(self, "denoiser", DenoiserSpec("identity"))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rgb_mean"] = list(self.rgb_mean)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SrConfig":
        d = dict(d)
        d["denoiser"] = DenoiserSpec(**d.get("denoiser", {}))
        d["rgb_mean"] = tuple(d.get("rgb_mean", (0.5, 0.5, 0.5)))
        return cls(**d)


class SrModel:
    def __init__(self, config: SrConfig, rng: np.random.Generator, dae: Optional[DaeModel] = None):
        self.config = config
        c = config
        wide = c.filters * c.expansion
        out_ch = 3 * c.scale ** 2
        self.head = WNConv2d("head", 3, c.filters, 3, rng)
        self.blocks: List[Tuple[WNConv2d, WNConv2d]] = [
            (WNConv2d(f"body.block{i}.conv1", c.filters, wide, 3, rng),
             WNConv2d(f"body.block{i}.conv2", wide, c.filters, 3, rng))
            for i in range(c.blocks)
        ]
        self.tail = WNConv2d("tail", c.filters, out_ch, 3, rng, init_scale=TAIL_INIT_SCALE)
        self.skip = WNConv2d("skip", 3, out_ch, SKIP_KERNEL, rng, init_scale=SKIP_INIT_JITTER)
        _init_as_upsampler(self.skip, c.scale)
        self._mean = np.asarray(c.rgb_mean, dtype=np.float32).reshape(1, 3, 1, 1)
        self.denoiser = Denoiser(c.denoiser, dae=dae) if c.denoiser.kind != "identity" else None

    # -- parameters -------------------------------------------------------
    def main_layers(self) -> List[WNConv2d]:
        return [self.head] + [conv for blk in self.blocks for conv in blk] + [self.tail]

    def layers(self) -> List[WNConv2d]:
        return self.main_layers() + [self.skip]

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers() for p in layer.parameters()]

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if not p.frozen]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, arrays: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        names = {p.name for p in params}
        if set(arrays) != names:
            raise CheckpointError(
                f"SR parameter names differ: missing {sorted(names - set(arrays))}, "
                f"unexpected {sorted(set(arrays) - names)}"
            )
        for p in params:
            if tuple(arrays[p.name].shape) != p.shape:
                raise CheckpointError(f"{p.name}: shape {arrays[p.name].shape} != {p.shape}")
            p.data = np.array(arrays[p.name], dtype=np.float32)

    def fingerprint(self) -> List[list]:
        return [[p.name, list(p.shape)] for p in self.parameters()]

    # -- forward ------------------------------------------------------------
    def main_path(self, x: Tensor) -> Tensor:
        h = self.head(x)
        for conv1, conv2 in self.blocks:
            h = h + conv2(E.relu(conv1(h)))
        return E.pixel_shuffle(self.tail(h), self.config.scale)

    def skip_path(self, x: Tensor) -> Tensor:
        return E.pixel_shuffle(self.skip(x), self.config.scale)

    def _check(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"SR model expects (N, 3, H, W) input, got shape {x.shape}")

    def forward_paths(self, main_in: Tensor, skip_in: Tensor) -> Tensor:
        self._check(main_in)
        self._check(skip_in)
        mean = Tensor(self._mean.astype(main_in.dtype))
        out = self.main_path(main_in - mean) + self.skip_path(skip_in - mean)
        return out + mean

    def denoise(self, imgs: Sequence[np.ndarray]) -> List[np.ndarray]:
        if self.denoiser is None:
            return [as_image(i) for i in imgs]
        return self.denoiser.batch(imgs)

    def prepare(self, imgs: Sequence[np.ndarray]) -> Tuple[Tensor, Tensor]:
        """Build the (main, skip) input tensors for a batch of LR images."""
        v = self.config.variant
        noisy = images_to_tensor(imgs)
        if v == "baseline":
            return noisy, noisy
        den = images_to_tensor(self.denoise(imgs))
        if v == "pre_net":
            return den, den
        return noisy, den

    def __call__(self, imgs: Sequence[np.ndarray]) -> Tensor:
        return self.forward_paths(*self.prepare(imgs))

    def super_resolve(self, imgs: Sequence[np.ndarray]) -> List[np.ndarray]:
        with E.no_grad():
            out = self(imgs)
        return tensor_to_images(out)

    def with_variant(self, variant: str, denoiser: DenoiserSpec, dae: Optional[DaeModel] = None) -> "SrModel":
        """Copy of this model's weights under a different composition."""
        cfg = replace(self.config, variant=variant, denoiser=denoiser)
        m = SrModel(cfg, np.random.default_rng(0), dae=dae)
        m.load_state_dict(self.state_dict())
        return m


def forward_baseline(model: SrModel, x: Tensor) -> Tensor:
    return model.forward_paths(x, x)


def _denoise_tensor(model: SrModel, x: Tensor) -> Tensor:
    imgs = tensor_to_images(x)
    return images_to_tensor(model.denoise(imgs))


def forward_pre_net(model: SrModel, x: Tensor) -> Tensor:
    d = _denoise_tensor(model, x)
    return model.forward_paths(d, d)


def forward_in_net(model: SrModel, x: Tensor) -> Tensor:
    return model.forward_paths(x, _denoise_tensor(model, x))


def init_model(config: SrConfig, seed: int = 0, dae: Optional[DaeModel] = None) -> SrModel:
    """Fresh model: He fan-in init with weight-norm gains equal to the direction norms.

    The tail conv starts scaled down and the skip conv starts as
    nearest-neighbour upsampling plus small noise, so an untrained model
    behaves like a plain upscaler.
    """
    return SrModel(config, np.random.default_rng(seed), dae=dae)


def expected_parameter_count(config: SrConfig) -> int:
    f, e, s = config.filters, config.expansion, config.scale

    def wn(cin, cout, k):
        return cout * cin * k * k + 2 * cout

    return (wn(3, f, 3) + config.blocks * (wn(f, e * f, 3) + wn(e * f, f, 3))
            + wn(f, 3 * s * s, 3) + wn(3, 3 * s * s, SKIP_KERNEL))


def save_model(model: SrModel, path) -> None:
    arrays = model.state_dict()
    dae = model.denoiser.dae if model.denoiser is not None else None
    if dae is not None:
        arrays.update({k: v for k, v in dae.state_dict().items()})
    meta = {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "fingerprint": model.fingerprint(),
        "embedded_dae": dae is not None,
    }
    E.save_arrays(path, arrays, meta=meta)


def load_model(path) -> SrModel:
    arrays, meta = E.load_arrays(path)
    if meta.get("format") != MODEL_FORMAT:
        raise CheckpointError(f"{path}: not an SR model checkpoint (format {meta.get('format')!r})")
    config = SrConfig.from_dict(meta["config"])
    dae = None
    if meta.get("embedded_dae"):
        dae = DaeModel()
        dae.load_state_dict({k: v for k, v in arrays.items() if k.startswith("dae.")})
        arrays = {k: v for k, v in arrays.items() if not k.startswith("dae.")}
    model = init_model(config, dae=dae)
    if model.fingerprint() != meta.get("fingerprint"):
        raise CheckpointError(f"{path}: architecture fingerprint does not match its config")
    model.load_state_dict(arrays)
    return model
