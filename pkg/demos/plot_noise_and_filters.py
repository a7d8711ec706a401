"""
Corrupting and cleaning an image
================================

Apply each noise process to a synthetic image, then try the median and
Wiener filters on it. Plates go to ``demo_out/``.
"""

import numpy as np

from nsrkit.denoisers import median_filter, wiener_filter
from nsrkit.harness.corpus import generate_corpus
from nsrkit.harness.montage import compose
from nsrkit.imaging import format_db, psnr, save_png
from nsrkit.noise import NoiseSpec, corrupt

clean = generate_corpus(1, 96, seed=5)[0]

specs = [NoiseSpec("gaussian", 0.01, 1), NoiseSpec("speckle", 0.1, 2),
         NoiseSpec("poisson", 0.1, 3), NoiseSpec("salt_pepper", 0.2, 4)]

print("%-16s %8s %8s %8s" % ("noise", "noisy", "median", "wiener"))
for spec in specs:
    noisy = corrupt(clean, spec)
    med = median_filter(noisy, 5)
    wie = wiener_filter(noisy, 5)
    print("%-16s %8s %8s %8s" % (spec.label, format_db(psnr(noisy, clean)),
                                 format_db(psnr(med, clean)), format_db(psnr(wie, clean))))
    plate = compose([("clean", clean), ("noisy", noisy), ("median", med), ("wiener", wie)])
    save_png(plate, "demo_out/filters-%s.png" % spec.kind)

# The median filter is the right tool for impulses: a single outlier
# cannot move the median of 25 samples.
flat = np.full((64, 64, 3), 0.5, np.float32)
hit = corrupt(flat, NoiseSpec("salt_pepper", 0.2, 9))
print("pixels restored:", np.all(median_filter(hit, 5) == flat, axis=2).mean())
