"""Training loops for the SR models and the denoising autoencoder.

An epoch is a fixed number of freshly sampled patch batches. Training noise is
re-drawn for every batch from seeds derived from (run noise seed, spec
seed, phase, step, slot), so a rerun with the same config reproduces the loss log bit-for-bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import engine as E
from ..denoisers import DaeModel, DenoiserSpec, TrainingError, load_dae, save_dae, train_dae
from ..imaging import (PatchPair, bicubic_downsample, images_to_tensor, psnr,
                       sample_patches)
from ..models import SrConfig, SrModel, init_model, load_model, save_model
from ..noise import NoiseSpec, corrupt, make_rng, sub_seed
from .config import ExperimentConfig, freeze_config
from .corpus import generate_corpus, load_directory

logger = logging.getLogger(__name__)

PHASE_IDS = {"pretrain": 1, "finetune": 2, "dae": 3, "val": 4}


@dataclass
class Dataset:
    train: List[np.ndarray]
    val: List[np.ndarray]
    scale: int

    def __post_init__(self):
        self.val_lr = [bicubic_downsample(v, self.scale) for v in self.val]

    def rgb_mean(self) -> Tuple[float, float, float]:
        stack = np.stack(self.train).astype(np.float64)
        return tuple(float(c) for c in stack.mean(axis=(0, 1, 2)))


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.corpus.kind == "procedural":
        imgs = generate_corpus(cfg.corpus.n_images, cfg.corpus.size, cfg.seeds.corpus, cfg.scale)
    else:
        imgs = load_directory(cfg.corpus.directory)
        need = cfg.split.train + cfg.split.val
        if len(imgs) < need:
            raise ValueError(f"{cfg.corpus.directory}: {len(imgs)} images, need {need}")
    train = imgs[:cfg.split.train]
    val = imgs[cfg.split.train:cfg.split.train + cfg.split.val]
    return Dataset(train=train, val=val, scale=cfg.scale)


def sample_batch(ds: Dataset, cfg: ExperimentConfig, noise: NoiseSpec, phase: str,
                 step: int) -> List[PatchPair]:
    """Batch ``step`` of a phase: random crops from random training images, LR corrupted."""
    rng = make_rng(cfg.seeds.sampling, PHASE_IDS[phase], step)
    out = []
    for slot in range(cfg.optimizer.batch_size):
        img = ds.train[int(rng.integers(0, len(ds.train)))]
        pair = sample_patches(img, 1, cfg.patch, cfg.scale, rng)[0]
        seed = sub_seed(cfg.seeds.noise, noise.seed, PHASE_IDS[phase], step, slot)
        lr = corrupt(pair.lr, noise.with_seed(seed))
        out.append(PatchPair(hr=pair.hr, lr=lr, scale=pair.scale, y=pair.y, x=pair.x))
    return out


def val_inputs(ds: Dataset, cfg: ExperimentConfig, noise: NoiseSpec) -> List[np.ndarray]:
    return [corrupt(lr, noise.with_seed(sub_seed(cfg.seeds.noise, noise.seed, PHASE_IDS["val"], i)))
            for i, lr in enumerate(ds.val_lr)]


def mean_psnr(model: SrModel, inputs: Sequence[np.ndarray], targets: Sequence[np.ndarray]) -> float:
    outs = model.super_resolve(list(inputs))
    return float(np.mean([psnr(o, t) for o, t in zip(outs, targets)]))


def fit_sr(model: SrModel, ds: Dataset, cfg: ExperimentConfig, noise: NoiseSpec, phase: str,
           epochs: int, lr: float, log: Optional[Callable[[dict], None]] = None) -> List[dict]:
    """Minimize MAE(model(noisy LR), HR) with Adam; keeps the best-validation weights."""
    params = model.trainable_parameters()
    state = E.AdamState(lr=lr)
    val_in = val_inputs(ds, cfg, noise)
    best = mean_psnr(model, val_in, ds.val)
    best_state = model.state_dict()
    history = []
    step = 0
    for epoch in range(epochs):
        losses = []
        for _ in range(cfg.optimizer.sr_steps_per_epoch):
            batch = sample_batch(ds, cfg, noise, phase, step)
            try:
                pred = model([p.lr for p in batch])
                loss = E.mae_loss(pred, images_to_tensor([p.hr for p in batch]))
            except FloatingPointError as exc:
                model.load_state_dict(best_state)
                raise TrainingError(
                    f"{phase} diverged at epoch {epoch}, step {step}: {exc}; "
                    f"model restored to last good weights"
                ) from None
            E.backward(loss)
            E.adam_step(params, state)
            losses.append(loss.item())
            step += 1
        val = mean_psnr(model, val_in, ds.val)
        if val > best:
            best, best_state = val, model.state_dict()
        rec = {"phase": phase, "epoch": epoch, "steps": step, "loss": float(np.mean(losses)),
               "val_psnr": val}
        history.append(rec)
        logger.info("%s epoch %d loss %.6f val %.3f dB", phase, epoch, rec["loss"], val)
        if log is not None:
            log(rec)
    model.load_state_dict(best_state)
    return history


def _jsonl_writer(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("", encoding="utf-8")

    def write(rec: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    return write


def base_sr_config(cfg: ExperimentConfig, ds: Dataset) -> SrConfig:
    return SrConfig(scale=cfg.scale, blocks=cfg.model.blocks, filters=cfg.model.filters,
                    expansion=cfg.model.expansion, rgb_mean=ds.rgb_mean())


def pretrain_sr(cfg: ExperimentConfig, ds: Optional[Dataset] = None,
                run_dir: Optional[Path] = None) -> Tuple[SrModel, List[dict]]:
    """Clean-data training of the baseline; stands in for published pretrained weights."""
    ds = ds or build_dataset(cfg)
    model = init_model(base_sr_config(cfg, ds), seed=cfg.seeds.init)
    writer = _jsonl_writer(run_dir / "log.jsonl") if run_dir else None
    hist = fit_sr(model, ds, cfg, NoiseSpec("none"), "pretrain", cfg.optimizer.pretrain_epochs,
                  cfg.optimizer.sr_lr, log=writer)
    if run_dir:
        save_model(model, run_dir / "model.ckpt")
    return model, hist


def train_sr(cfg: ExperimentConfig, variant: str, denoiser: DenoiserSpec,
             pretrained: SrModel, ds: Optional[Dataset] = None, dae: Optional[DaeModel] = None,
             run_dir: Optional[Path] = None, lr: Optional[float] = None) -> Tuple[SrModel, List[dict]]:
    """Fine-tune a copy of ``pretrained`` on noisy data under the given composition."""
    ds = ds or build_dataset(cfg)
    if denoiser.kind == "dae" and dae is None:
        if not denoiser.dae_checkpoint:
            raise TrainingError("dae denoiser selected but no trained DAE checkpoint given")
        dae = load_dae(denoiser.dae_checkpoint)
    model = pretrained.with_variant(variant, denoiser, dae=dae)
    writer = _jsonl_writer(run_dir / "log.jsonl") if run_dir else None
    hist = fit_sr(model, ds, cfg, cfg.train_noise, "finetune", cfg.optimizer.sr_epochs,
                  cfg.optimizer.sr_lr if lr is None else lr, log=writer)
    if run_dir:
        save_model(model, run_dir / "model.ckpt")
    return model, hist


def dae_batches(ds: Dataset, cfg: ExperimentConfig, noise: NoiseSpec):
    """Step -> (noisy LR batch, clean LR batch) for DAE training."""
    def fn(step: int):
        batch = sample_batch(ds, cfg, noise, "dae", step)
        clean = [bicubic_downsample(p.hr, cfg.scale) for p in batch]
        return np.stack([p.lr for p in batch]), np.stack(clean)
    return fn


def train_dae_run(cfg: ExperimentConfig, ds: Optional[Dataset] = None,
                  run_dir: Optional[Path] = None) -> Tuple[DaeModel, List[dict]]:
    ds = ds or build_dataset(cfg)
    model = DaeModel(seed=cfg.seeds.init)
    writer = _jsonl_writer(run_dir / "log.jsonl") if run_dir else None
    hist = train_dae(model, dae_batches(ds, cfg, cfg.train_noise), epochs=cfg.optimizer.dae_epochs,
                     lr=cfg.optimizer.lr, steps_per_epoch=cfg.optimizer.dae_steps_per_epoch,
                     log=writer)
    if run_dir:
        save_dae(model, run_dir / "dae.ckpt")
    return model, hist


# -- run-directory helpers used by the CLI -----------------------------------

def run_paths(cfg: ExperimentConfig) -> Dict[str, Path]:
    root = Path(cfg.output_dir)
    return {"root": root, "dae": root / "dae", "pretrain": root / "pretrain", "eval": root / "eval"}


def model_dir(cfg: ExperimentConfig, variant: str, denoiser: str) -> Path:
    return Path(cfg.output_dir) / f"sr-{variant}-{denoiser}"


def ensure_pretrained(cfg: ExperimentConfig, ds: Dataset) -> SrModel:
    """Load the run's clean-pretrained model, training it first if absent or stale."""
    d = run_paths(cfg)["pretrain"]
    stamp = d / "config.hash"
    if (d / "model.ckpt").exists() and stamp.exists() and stamp.read_text().strip() == cfg.hash():
        return load_model(d / "model.ckpt")
    model, _ = pretrain_sr(cfg, ds, run_dir=d)
    stamp.write_text(cfg.hash() + "\n")
    return model


def start_run(cfg: ExperimentConfig) -> Path:
    root = Path(cfg.output_dir)
    freeze_config(cfg, root)
    return root
