"""PSNR evaluation over (model, test noise) cells and report rendering."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..imaging import bicubic_upsample, format_db, psnr
from ..models import SrModel
from ..noise import NoiseSpec, corrupt, sub_seed

Upscaler = Callable[[List[np.ndarray]], List[np.ndarray]]


def as_upscaler(model) -> Upscaler:
    if isinstance(model, SrModel):
        return model.super_resolve
    if callable(model):
        return model
    raise TypeError(f"cannot evaluate object of type {type(model).__name__}")


def bicubic_upscaler(scale: int) -> Upscaler:
    return lambda imgs: [bicubic_upsample(i, scale) for i in imgs]


def noisy_input(lr: np.ndarray, noise: NoiseSpec, index: int) -> np.ndarray:
    """Corrupted LR input for validation image ``index``; the seed is fixed per (image, noise)."""
    return corrupt(lr, noise.with_seed(sub_seed(noise.seed, index)))


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else math.nan


@dataclass
class EvalCell:
    model: str
    noise: str
    mean_psnr: float
    per_image: List[float]
    runtime: float = 0.0


@dataclass
class EvalReport:
    cells: List[EvalCell] = field(default_factory=list)
    config_hash: str = ""

    def cell(self, model: str, noise: str) -> EvalCell:
        for c in self.cells:
            if c.model == model and c.noise == noise:
                return c
        raise KeyError((model, noise))

    def mean(self, model: str, noise: str) -> float:
        return self.cell(model, noise).mean_psnr

    @property
    def models(self) -> List[str]:
        return list(dict.fromkeys(c.model for c in self.cells))

    @property
    def noises(self) -> List[str]:
        return list(dict.fromkeys(c.noise for c in self.cells))

    def to_dict(self, with_runtime: bool = True) -> dict:
        cells = []
        for c in sorted(self.cells, key=lambda c: (c.noise, c.model)):
            d = asdict(c)
            d["mean_psnr"] = _encode(d["mean_psnr"])
            d["per_image"] = [_encode(v) for v in d["per_image"]]
            if not with_runtime:
                d.pop("runtime")
            cells.append(d)
        return {"config_hash": self.config_hash, "cells": cells}

    def to_json(self, with_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(with_runtime), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        cells = [EvalCell(model=c["model"], noise=c["noise"], mean_psnr=_decode(c["mean_psnr"]),
                          per_image=[_decode(v) for v in c["per_image"]],
                          runtime=c.get("runtime", 0.0)) for c in d["cells"]]
        return cls(cells=cells, config_hash=d.get("config_hash", ""))

    def table(self) -> str:
        """Plain-text table: one row per test noise, one column per model."""
        models, noises = self.models, self.noises
        w0 = max([len("noise")] + [len(n) for n in noises])
        widths = [max(8, len(m)) for m in models]
        lines = ["  ".join(["noise".ljust(w0)] + [m.rjust(w) for m, w in zip(models, widths)])]
        lines.append("-" * len(lines[0]))
        for n in noises:
            row = [n.ljust(w0)]
            for m, w in zip(models, widths):
                try:
                    row.append(format_db(self.mean(m, n)).rjust(w))
                except KeyError:
                    row.append("-".rjust(w))
            lines.append("  ".join(row))
        if self.config_hash:
            lines.append(f"config {self.config_hash}")
        return "\n".join(lines) + "\n"


def _encode(v: float):
    return "inf" if math.isinf(v) and v > 0 else v


def _decode(v) -> float:
    return math.inf if v == "inf" else float(v)


def evaluate(models: Mapping[str, object], test_noise: Sequence[NoiseSpec],
             val_hr: Sequence[np.ndarray], val_lr: Sequence[np.ndarray], config_hash: str = "",
             save_outputs: Optional[Path] = None) -> EvalReport:
    """PSNR of every model under every test noise, averaged over the validation images.

    With ``save_outputs``, reconstructions are written as float32 ``.npy`` files
    under ``<dir>/<model>/<noise>/``, the noisy inputs under ``<dir>/input/<noise>/``
    and the clean HR targets under ``<dir>/hr/``, so the report can be recomputed
    later by :func:`recompute_report`.
    """
    if len(val_hr) != len(val_lr):
        raise ValueError(f"{len(val_hr)} HR images but {len(val_lr)} LR images")
    if save_outputs is not None:
        hr_dir = Path(save_outputs) / "hr"
        hr_dir.mkdir(parents=True, exist_ok=True)
        for i, hr in enumerate(val_hr):
            np.save(hr_dir / f"img{i:04d}.npy", hr)
    report = EvalReport(config_hash=config_hash)
    index = []
    for noise in test_noise:
        inputs = [noisy_input(lr, noise, i) for i, lr in enumerate(val_lr)]
        if save_outputs is not None:
            d = Path(save_outputs) / "input" / noise.label.replace(":", "_")
            d.mkdir(parents=True, exist_ok=True)
            for i, x in enumerate(inputs):
                np.save(d / f"img{i:04d}.npy", x)
        for name, model in models.items():
            up = as_upscaler(model)
            rel = f"{name}/{noise.label.replace(':', '_')}"
            t0 = time.perf_counter()
            outs = up(inputs)
            runtime = time.perf_counter() - t0
            scores = []
            for i, (o, hr) in enumerate(zip(outs, val_hr)):
                if o.shape != hr.shape:
                    raise ValueError(f"{name}: output {o.shape} does not match HR {hr.shape}")
                scores.append(psnr(o, hr))
                if save_outputs is not None:
                    d = Path(save_outputs) / rel
                    d.mkdir(parents=True, exist_ok=True)
                    np.save(d / f"img{i:04d}.npy", o)
            if save_outputs is not None:
                index.append({"model": name, "noise": noise.label, "dir": rel})
            report.cells.append(EvalCell(name, noise.label, _mean(scores), scores, runtime))
    if save_outputs is not None:
        (Path(save_outputs) / "index.json").write_text(json.dumps(index, indent=1), encoding="utf-8")
    return report


def recompute_report(outputs_dir, config_hash: str = "") -> EvalReport:
    """Rebuild an :class:`EvalReport` from persisted reconstructions."""
    root = Path(outputs_dir)
    hr = [np.load(p) for p in sorted((root / "hr").glob("*.npy"))]
    index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    report = EvalReport(config_hash=config_hash)
    for entry in index:
        outs = [np.load(p) for p in sorted((root / entry["dir"]).glob("*.npy"))]
        if len(outs) != len(hr):
            raise ValueError(f"{entry['dir']}: {len(outs)} outputs for {len(hr)} targets")
        scores = [psnr(o, h) for o, h in zip(outs, hr)]
        report.cells.append(EvalCell(entry["model"], entry["noise"], _mean(scores), scores))
    return report


def write_report(report: EvalReport, directory) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"json": directory / "report.json", "text": directory / "report.txt"}
    paths["json"].write_text(report.to_json() + "\n", encoding="utf-8")
    paths["text"].write_text(report.table(), encoding="utf-8")
    return paths


def read_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
