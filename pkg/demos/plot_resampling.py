"""
Bicubic resampling and PSNR
===========================

Downsample by two, upsample back, and measure what was lost.
"""

import numpy as np

from nsrkit.harness.corpus import generate_corpus
from nsrkit.imaging import (bicubic_downsample, bicubic_upsample, nearest_upsample, psnr,
                            sample_patches)

img = generate_corpus(1, 96, seed=2)[0]
lr = bicubic_downsample(img, 2)
print("hr", img.shape, "lr", lr.shape)

print("bicubic round trip: %.2f dB" % psnr(bicubic_upsample(lr, 2), img))
print("nearest round trip: %.2f dB" % psnr(nearest_upsample(lr, 2), img))

# Constant images survive untouched because kernel rows sum to one
flat = np.full((16, 16, 3), 0.25, np.float32)
print("constant error:", np.abs(bicubic_downsample(flat, 2) - 0.25).max())

# Training pairs come from random crops; the LR half is made by the same downsampler
pairs = sample_patches(img, 3, 32, 2, np.random.default_rng(0))
for p in pairs:
    print("crop at", (p.y, p.x), p.hr.shape, "->", p.lr.shape)
