"""Finite-difference gradient checking for the tensor engine."""

import numpy as np

from nsrkit import engine as E
from oracles import central_difference, max_rel_error

H = 1e-3
TOL = 1e-3


def check(fn, arrays, rng, max_coords=60, h=H, dtype=np.float64):
    """Max relative error between autodiff and central differences.

    ``fn`` maps tensors (one per array) to a scalar tensor. Arrays are float64
    and are perturbed in place during the finite-difference pass, which is
    always evaluated in float64. ``dtype`` sets the precision of the autodiff
    pass. At most ``max_coords`` coordinates per array are probed.
    """
    tensors = [E.Tensor(a.astype(dtype), requires_grad=True) for a in arrays]
    loss = fn(*tensors)
    E.backward(loss)
    analytic, index_sets = [], []
    for k, (a, t) in enumerate(zip(arrays, tensors)):
        g = t.grad if t.grad is not None else np.zeros_like(a)
        flat = np.arange(a.size)
        if a.size > max_coords:
            flat = rng.choice(a.size, size=max_coords, replace=False)
        for f in flat:
            idx = np.unravel_index(f, a.shape)
            index_sets.append((k, idx))
            analytic.append(float(g[idx]))

    def f():
        with E.no_grad():
            return fn(*[E.Tensor(a) for a in arrays]).item()

    numeric = central_difference(f, arrays, index_sets, h=h)
    return max_rel_error(analytic, numeric)


def projected(op, rng, out_shape):
    """Wrap a tensor-valued op into a smooth scalar: sum(op(...) * R)."""
    r = E.Tensor(rng.standard_normal(out_shape))

    def fn(*ts):
        return E.tsum(E.mul(op(*ts), r))

    return fn


def separated(rng, shape, gap=0.05):
    """Random values with pairwise gaps >= gap after shuffling (keeps max-pool and relu away from kinks)."""
    n = int(np.prod(shape))
    vals = (np.arange(n) - n // 2 + 0.5) * gap
    return rng.permutation(vals).reshape(shape)
