from __future__ import annotations

from typing import Dict, List

import numpy as np

from . import ops
from .tensor import Parameter, Tensor


class WNConv2d:
    """Weight-normalized convolution: direction ``v``, per-channel gain ``g``, bias.

    ``g`` starts at the channel norm of ``v`` so the effective weight equals
    ``v`` at initialization. ``v`` uses He fan-in scaling.
    """

    def __init__(self, name: str, cin: int, cout: int, k: int, rng: np.random.Generator,
                 init_scale: float = 1.0):
        if k % 2 == 0:
            raise ValueError(f"{name}: kernel size must be odd, got {k}")
        fan_in = cin * k * k
        v = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cout, cin, k, k)) * init_scale
        v = v.astype(np.float32)
        self.k = k
        self.v = Parameter(v, name=f"{name}.v")
        self.g = Parameter(np.sqrt((v.reshape(cout, -1).astype(np.float64) ** 2).sum(1)).astype(np.float32),
                           name=f"{name}.g")
        self.b = Parameter(np.zeros(cout, dtype=np.float32), name=f"{name}.b")

    def parameters(self) -> List[Parameter]:
        return [self.v, self.g, self.b]

    def __call__(self, x: Tensor) -> Tensor:
        w = ops.weight_norm_resolve(self.v, self.g)
        return ops.conv2d(x, w, self.b, padding=self.k // 2)


def named_parameters(params) -> Dict[str, Parameter]:
    out = {}
    for p in params:
        if p.name in out:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        out[p.name] = p
    return out
