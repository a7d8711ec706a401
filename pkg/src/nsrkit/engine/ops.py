"""Differentiable primitives used by the SR network and the autoencoder.

Every op returns a fresh tensor and never writes into its inputs. Backward
closures receive the upstream gradient as a bare ndarray and return one
gradient (or None) per parent.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, make_result


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data + b.data.astype(a.dtype, copy=False)

    def _bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(out, (a, b), _bw, "add")


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data - b.data.astype(a.dtype, copy=False)

    def _bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(out, (a, b), _bw, "sub")


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    bd = b.data.astype(a.dtype, copy=False)
    out = a.data * bd

    def _bw(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(out, (a, b), _bw, "mul")


def tsum(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(dtype=np.float64), dtype=x.dtype)

    def _bw(g):
        return (np.full(x.shape, g, dtype=x.dtype),)

    return make_result(out, (x,), _bw, "sum")


def tmean(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.mean(dtype=np.float64), dtype=x.dtype)

    def _bw(g):
        return (np.full(x.shape, g / n, dtype=x.dtype),)

    return make_result(out, (x,), _bw, "mean")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)

    def _bw(g):
        return (g * mask,)

    return make_result(out, (x,), _bw, "relu")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: int = 0) -> Tensor:
    """2-D cross-correlation (no kernel flip) with symmetric zero padding.

    Shapes: x (N, Cin, H, W), weight (Cout, Cin, kH, kW), bias (Cout,).
    The output is (N, Cout, H + 2p - kH + 1, W + 2p - kW + 1).
    """
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be 4-D (N, C, H, W), got shape {x.shape}")
    if weight.ndim != 4:
        raise ValueError(f"conv2d weight must be 4-D (Cout, Cin, kH, kW), got shape {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ValueError(
            f"conv2d channel mismatch: input has Cin={cin}, weight expects Cin={wcin}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d kernel sides must be odd, got kH={kh}, kW={kw}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"conv2d bias must have shape ({cout},), got {bias.shape}")
    ho, wo = h + 2 * padding - kh + 1, w + 2 * padding - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}"
        )

    dt = x.dtype
    # channels-last im2col: column layout (kh, kw, Cin) keeps every shifted copy contiguous
    xp = np.pad(x.data.transpose(0, 2, 3, 1), ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols = np.empty((n, ho, wo, kh, kw, cin), dtype=dt)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xp[:, i:i + ho, j:j + wo, :]
    cols = cols.reshape(n * ho * wo, kh * kw * cin)
    wmat = weight.data.astype(dt, copy=False).transpose(0, 2, 3, 1).reshape(cout, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data.astype(dt, copy=False)
    out = np.ascontiguousarray(out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)

    def _bw(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, cout)
        gw = None
        if weight.requires_grad:
            gw = (g2.T @ cols).reshape(cout, kh, kw, cin).transpose(0, 3, 1, 2)
            gw = np.ascontiguousarray(gw)
        gx = None
        if x.requires_grad:
            dcols = (g2 @ wmat).reshape(n, ho, wo, kh, kw, cin)
            gxp = np.zeros(xp.shape, dtype=dt)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + ho, j:j + wo, :] += dcols[:, :, :, i, j, :]
            gx = np.ascontiguousarray(gxp[:, padding:padding + h, padding:padding + w, :].transpose(0, 3, 1, 2))
        if bias is None:
            return gx, gw
        gb = g2.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return make_result(out, parents, _bw, "conv2d")


def max_pool2(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2. Ties route the gradient to the first
    element in row-major window order."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(
            f"max_pool2 needs even spatial dims, got {h}x{w}; pad the input to even size first"
        )
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def _bw(g):
        onehot = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(onehot, idx[..., None], g[..., None], axis=-1)
        gx = onehot.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (gx.reshape(n, c, h, w),)

    return make_result(np.ascontiguousarray(out), (x,), _bw, "max_pool2")


def nearest_upsample2(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def _bw(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return make_result(out, (x,), _bw, "nearest_upsample2")


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, cr2, h, w = a.shape
    c = cr2 // (r * r)
    return a.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, c, hr, wr = a.shape
    h, w = hr // r, wr // r
    return a.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange (N, C*r*r, H, W) into (N, C, r*H, r*W).

    out[n, c, h*r + i, w*r + j] = x[n, c*r*r + i*r + j, h, w]
    """
    if x.ndim != 4:
        raise ValueError(f"pixel_shuffle input must be 4-D, got shape {x.shape}")
    if r < 1 or x.shape[1] % (r * r):
        raise ValueError(f"pixel_shuffle: {x.shape[1]} channels not divisible by r^2={r * r}")
    out = np.ascontiguousarray(_shuffle(x.data, r))

    def _bw(g):
        return (np.ascontiguousarray(_unshuffle(g, r)),)

    return make_result(out, (x,), _bw, "pixel_shuffle")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Inverse permutation of :func:`pixel_shuffle`."""
    if x.ndim != 4:
        raise ValueError(f"pixel_unshuffle input must be 4-D, got shape {x.shape}")
    if x.shape[2] % r or x.shape[3] % r:
        raise ValueError(f"pixel_unshuffle: spatial dims {x.shape[2:]} not divisible by r={r}")
    out = np.ascontiguousarray(_unshuffle(x.data, r))

    def _bw(g):
        return (np.ascontiguousarray(_shuffle(g, r)),)

    return make_result(out, (x,), _bw, "pixel_unshuffle")


def weight_norm_resolve(v: Tensor, g: Tensor) -> Tensor:
    """w = g * v / ||v||, norm taken per output channel (axis 0)."""
    if g.shape != (v.shape[0],):
        raise ValueError(f"weight_norm_resolve: g shape {g.shape} != ({v.shape[0]},)")
    cout = v.shape[0]
    flat = v.data.reshape(cout, -1)
    norm = np.sqrt(np.einsum("ij,ij->i", flat, flat))
    if np.any(norm == 0):
        bad = np.flatnonzero(norm == 0).tolist()
        raise ValueError(f"weight_norm_resolve: zero-norm output channels {bad}")
    unit = flat / norm[:, None]
    gd = g.data.astype(v.dtype, copy=False)
    out = (unit * gd[:, None]).reshape(v.shape)

    def _bw(grad):
        gf = grad.reshape(cout, -1)
        proj = np.einsum("ij,ij->i", gf, unit)
        dv = (gd / norm)[:, None] * (gf - unit * proj[:, None])
        return dv.reshape(v.shape), proj.astype(g.dtype, copy=False)

    return make_result(out, (v, g), _bw, "weight_norm")


def _check_same(pred: Tensor, target: Tensor, name: str) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"{name}: shape mismatch pred {pred.shape} vs target {target.shape}")


def mae_loss(pred: Tensor, target) -> Tensor:
    target = as_tensor(target, like=pred)
    _check_same(pred, target, "mae_loss")
    diff = pred.data - target.data.astype(pred.dtype, copy=False)
    n = diff.size
    out = np.asarray(np.abs(diff).mean(dtype=np.float64), dtype=pred.dtype)

    def _bw(g):
        s = np.sign(diff) * (g / n)
        return s, -s

    return make_result(out, (pred, target), _bw, "mae_loss")


def mse_loss(pred: Tensor, target) -> Tensor:
    target = as_tensor(target, like=pred)
    _check_same(pred, target, "mse_loss")
    diff = pred.data - target.data.astype(pred.dtype, copy=False)
    n = diff.size
    out = np.asarray(np.square(diff).mean(dtype=np.float64), dtype=pred.dtype)

    def _bw(g):
        s = diff * (2.0 * g / n)
        return s, -s

    return make_result(out, (pred, target), _bw, "mse_loss")
