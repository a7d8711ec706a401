"""Seeded image corruption: Gaussian, speckle, Poisson and salt-and-pepper.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``. Only ``Generator.random`` (53-bit uniform doubles) is drawn
from it; normal and Poisson variates are derived here (Box-Muller and CDF
inversion) so the noise fields depend only on PCG64 output, not on numpy's
sampler implementations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np

from .imaging import PatchPair, as_image

KINDS = ("none", "gaussian", "speckle", "poisson", "salt_pepper")

# Poisson means above this use a rounded normal approximation.
_POISSON_INVERSION_MAX = 500.0
_POISSON_EXACT_MEAN = 2.0 ** 52


class NoiseSpecError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    param: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NoiseSpecError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.param) or self.param < 0:
            raise NoiseSpecError(f"noise parameter must be finite and >= 0, got {self.param}")
        if self.kind == "salt_pepper" and self.param > 1:
            raise NoiseSpecError(f"salt_pepper probability must be <= 1, got {self.param}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise NoiseSpecError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse ``kind:param:seed`` (seed optional, default 0)."""
        parts = text.strip().split(":")
        if not 1 <= len(parts) <= 3 or not re.fullmatch(r"[a-z_]+", parts[0]):
            raise NoiseSpecError(f"cannot parse noise spec {text!r}; use kind:param:seed")
        try:
            param = float(parts[1]) if len(parts) > 1 else 0.0
            seed = int(parts[2]) if len(parts) > 2 else 0
        except ValueError:
            raise NoiseSpecError(f"cannot parse noise spec {text!r}; use kind:param:seed") from None
        return cls(parts[0], param, seed)

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=int(seed))

    @property
    def label(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.param:g}"

    def __str__(self) -> str:
        return f"{self.kind}:{self.param:g}:{self.seed}"


def make_rng(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in keys])))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller transform on PCG64 uniforms (float64)."""
    n = int(np.prod(shape))
    half = (n + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return z.reshape(shape)


def poisson(rng: np.random.Generator, mean: np.ndarray) -> np.ndarray:
    """Poisson variates by sequential CDF inversion, one uniform per element."""
    mean = np.asarray(mean, dtype=np.float64)
    u = rng.random(mean.shape)
    out = np.zeros(mean.shape, dtype=np.float64)
    small = mean <= _POISSON_INVERSION_MAX
    lam = mean[small]
    uu = u[small]
    k = np.zeros(lam.shape)
    pmf = np.exp(-lam)
    cdf = pmf.copy()
    active = uu > cdf
    while np.any(active):
        k = np.where(active, k + 1, k)
        pmf = np.where(active, pmf * lam / np.maximum(k, 1), pmf)
        cdf = np.where(active, cdf + pmf, cdf)
        # floating-point CDF can stall just below u in the far tail
        active = active & (uu > cdf) & (pmf > 0)
    out[small] = k
    if np.any(~small):
        big = mean[~small]
        z = standard_normal(rng, big.shape)
        out[~small] = np.maximum(np.round(big + np.sqrt(big) * z), 0.0)
    return out


def corrupt(img: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Apply the corruption described by ``spec``; result is clamped to [0, 1]."""
    img = as_image(img)
    if spec.kind == "none":
        return img.copy()
    rng = make_rng(spec.seed)
    x = img.astype(np.float64)
    if spec.kind == "gaussian":
        y = x + np.sqrt(spec.param) * standard_normal(rng, x.shape)
    elif spec.kind == "speckle":
        y = x * (1.0 + np.sqrt(spec.param) * standard_normal(rng, x.shape))
    elif spec.kind == "poisson":
        if spec.param == 0:
            y = x
        else:
            with np.errstate(over="ignore"):
                mean = x / spec.param
            # beyond 2**52 the relative Poisson spread is far below float32 resolution
            exact = ~(mean < _POISSON_EXACT_MEAN)
            y = spec.param * poisson(rng, np.where(exact, 0.0, mean))
            y[exact] = x[exact]
    elif spec.kind == "salt_pepper":
        h, w = x.shape[:2]
        hit = rng.random((h, w)) < spec.param
        salt = rng.random((h, w)) < 0.5
        y = x.copy()
        y[hit & salt] = 1.0
        y[hit & ~salt] = 0.0
    else:  # pragma: no cover - guarded by NoiseSpec
        raise NoiseSpecError(f"unknown noise kind {spec.kind!r}")
    return np.clip(y, 0.0, 1.0).astype(np.float32)


def sub_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit child seed from a parent seed and integer keys."""
    state = np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def corrupt_batch(pairs: Sequence[PatchPair], spec: NoiseSpec) -> List[PatchPair]:
    """Corrupt the LR member of each pair; patch i uses seed ``sub_seed(spec.seed, i)``."""
    out = []
    for i, p in enumerate(pairs):
        lr = corrupt(p.lr, spec.with_seed(sub_seed(spec.seed, i)))
        out.append(replace(p, lr=lr))
    return out
