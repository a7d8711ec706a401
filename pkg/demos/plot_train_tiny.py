"""
A tiny end-to-end experiment
============================

Pretrain a small WDSR-style network on clean data, fine-tune it on
Gaussian noise with and without a denoiser, and compare the results on
two kinds of test noise. Sized to finish in under a minute on one core;
``configs/desk.yaml`` holds the full desk-scale setup.
"""

from nsrkit.denoisers import DenoiserSpec
from nsrkit.harness.config import config_from_dict
from nsrkit.harness.evaluate import bicubic_upscaler, evaluate
from nsrkit.harness.train import build_dataset, pretrain_sr, train_sr

cfg = config_from_dict({
    "corpus": {"n_images": 20, "size": 48},
    "split": {"train": 16, "val": 4},
    "patch": 48,
    "model": {"blocks": 1, "filters": 8},
    "optimizer": {"pretrain_epochs": 150, "sr_epochs": 150, "sr_steps_per_epoch": 1, "batch_size": 4},
    "test_noise": ["gaussian:0.1:101", "salt_pepper:0.2:104"],
    "output_dir": "demo_out/tiny",
})
ds = build_dataset(cfg)

pre, log = pretrain_sr(cfg, ds)
print("pretrained, val PSNR %.2f dB" % log[-1]["val_psnr"])

models = {"bicubic": bicubic_upscaler(cfg.scale), "no-tuning": pre}
models["no-denoiser"], _ = train_sr(cfg, "baseline", DenoiserSpec(), pre, ds)
models["pre-net+median"], _ = train_sr(cfg, "pre_net", DenoiserSpec("median"), pre, ds)
models["in-net+median"], _ = train_sr(cfg, "in_net", DenoiserSpec("median"), pre, ds)

report = evaluate(models, cfg.test_noise, ds.val, ds.val_lr, config_hash=cfg.hash())
print(report.table())
