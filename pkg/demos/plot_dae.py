"""
Training the denoising autoencoder
==================================

Fit the convolutional autoencoder on Gaussian-corrupted LR patches and
compare its output error with the error of the noisy input. The desk
experiment uses a rate of 1e-4 and more steps; this demo takes a shortcut.
"""

import numpy as np

from nsrkit.denoisers import DaeModel, dae_forward_batch, dae_parameter_count, train_dae
from nsrkit.harness.corpus import generate_corpus
from nsrkit.imaging import bicubic_downsample, mse, sample_patches
from nsrkit.noise import NoiseSpec, corrupt, sub_seed

print("parameters:", dae_parameter_count())

images = generate_corpus(12, 64, seed=7)
rng = np.random.default_rng(0)
noise = NoiseSpec("gaussian", 0.1, 5)


def batch(step):
    # fresh crops and fresh noise every step
    pairs = [sample_patches(images[int(rng.integers(8))], 1, 64, 2, rng)[0] for _ in range(4)]
    noisy = [corrupt(p.lr, noise.with_seed(sub_seed(noise.seed, step, k))) for k, p in enumerate(pairs)]
    return np.stack(noisy), np.stack([p.lr for p in pairs])


model = DaeModel(seed=1)
for rec in train_dae(model, batch, epochs=40, lr=1e-3, steps_per_epoch=5):
    print("epoch %(epoch)d loss %(loss).5f" % rec)

val = [bicubic_downsample(img, 2) for img in images[8:]]
noisy = [corrupt(v, noise.with_seed(100 + i)) for i, v in enumerate(val)]
for v, y, d in zip(val, noisy, dae_forward_batch(model, noisy)):
    print("noisy mse %.4f  dae mse %.4f" % (mse(y, v), mse(d, v)))
