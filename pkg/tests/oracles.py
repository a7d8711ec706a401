"""Brute-force reference implementations the library is checked against.

These are deliberately naive (explicit loops, no shared code with the
library) so a bug in a vectorized path cannot hide in its own oracle.
"""

import math

import numpy as np


def conv2d_loops(x, w, b, padding):
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((n, cin, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wd] = x
    ho, wo = h + 2 * padding - kh + 1, wd + 2 * padding - kw + 1
    out = np.zeros((n, cout, ho, wo))
    for a in range(n):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = b[o]
                    for c in range(cin):
                        for p in range(kh):
                            for q in range(kw):
                                acc += xp[a, c, i + p, j + q] * w[o, c, p, q]
                    out[a, o, i, j] = acc
    return out


def max_pool2_scan(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for a in range(n):
        for k in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[a, k, i, j] = max(x[a, k, 2 * i + p, 2 * j + q] for p in range(2) for q in range(2))
    return out


def pixel_shuffle_index(x, r):
    n, cr2, h, w = x.shape
    c = cr2 // (r * r)
    out = np.zeros((n, c, h * r, w * r))
    for a in range(n):
        for k in range(c):
            for y in range(h):
                for z in range(w):
                    for i in range(r):
                        for j in range(r):
                            out[a, k, y * r + i, z * r + j] = x[a, k * r * r + i * r + j, y, z]
    return out


def _reflect(i, n):
    # mirror without repeating the edge sample: -1 -> 1, n -> n - 2
    while i < 0 or i >= n:
        i = -i if i < 0 else 2 * (n - 1) - i
    return i


def window_values(ch, y, x, window):
    h, w = ch.shape
    r = window // 2
    return [ch[_reflect(y + dy, h), _reflect(x + dx, w)]
            for dy in range(-r, r + 1) for dx in range(-r, r + 1)]


def median_gather_sort(ch, window):
    h, w = ch.shape
    out = np.zeros_like(ch, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            vals = sorted(window_values(ch, y, x, window))
            out[y, x] = vals[len(vals) // 2]
    return out


def wiener_two_pass(ch, window):
    ch = np.asarray(ch, dtype=np.float64)
    h, w = ch.shape
    mu = np.zeros((h, w))
    var = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            vals = np.array(window_values(ch, y, x, window))
            mu[y, x] = vals.mean()
    for y in range(h):
        for x in range(w):
            vals = np.array(window_values(ch, y, x, window))
            var[y, x] = np.mean((vals - mu[y, x]) ** 2)
    nu = var.mean()
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            denom = max(var[y, x], nu)
            gain = 0.0 if denom == 0 else max(var[y, x] - nu, 0.0) / denom
            out[y, x] = min(max(mu[y, x] + gain * (ch[y, x] - mu[y, x]), 0.0), 1.0)
    return out


def psnr_loops(a, b):
    total, count = 0.0, 0
    for idx in np.ndindex(a.shape):
        d = float(a[idx]) - float(b[idx])
        total += d * d
        count += 1
    mse = total / count
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def catmull_rom(t):
    t = abs(t)
    if t <= 1:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1
    if t < 2:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4 * t + 2
    return 0.0


def bicubic_kernel_sum(img, out_h, out_w):
    """Direct 2-D weighted sum with the stretched Catmull-Rom kernel and edge replication."""
    h, w, c = img.shape
    sy, sx = h / out_h, w / out_w
    ky, kx = max(sy, 1.0), max(sx, 1.0)
    out = np.zeros((out_h, out_w, c))
    for i in range(out_h):
        cy = (i + 0.5) * sy - 0.5
        for j in range(out_w):
            cx = (j + 0.5) * sx - 0.5
            acc = np.zeros(c)
            wsum = 0.0
            for yy in range(math.floor(cy - 2 * ky) - 1, math.ceil(cy + 2 * ky) + 2):
                wy = catmull_rom((cy - yy) / ky)
                if wy == 0:
                    continue
                for xx in range(math.floor(cx - 2 * kx) - 1, math.ceil(cx + 2 * kx) + 2):
                    wx = catmull_rom((cx - xx) / kx)
                    if wx == 0:
                        continue
                    pix = img[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)]
                    acc += wy * wx * pix
                    wsum += wy * wx
            out[i, j] = acc / wsum
    return np.clip(out, 0.0, 1.0)


def adam_scalar(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        p = p - lr * mhat / (math.sqrt(vhat) + eps)
    return p


def central_difference(f, arrays, index_sets, h=1e-3):
    """d f / d arrays[k][idx] by central differences, for (k, idx) in index_sets."""
    out = []
    for k, idx in index_sets:
        arr = arrays[k]
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        out.append((fp - fm) / (2 * h))
    return np.array(out)


def max_rel_error(a, b, floor=1e-6):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
