from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from .tensor import Parameter


@dataclass
class AdamState:
    """Moment buffers and step counter for Adam, keyed by parameter name.

    beta1/beta2/eps default to the values published with the optimizer.
    """

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Iterable[Parameter], state: AdamState) -> None:
    """One bias-corrected Adam update; zeroes the gradients afterwards."""
    params = [p for p in params if not p.frozen]
    missing = [p.name for p in params if p.grad is None]
    if missing:
        raise RuntimeError(f"adam_step: no gradient for parameters {missing}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p in params:
        g = p.grad
        m = state.m.get(p.name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        elif m.shape != p.shape:
            raise ValueError(f"adam_step: moment shape {m.shape} != parameter {p.name} {p.shape}")
        v = state.v[p.name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[p.name] = m
        state.v[p.name] = v
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - update).astype(p.dtype, copy=False)
        p.grad = None
