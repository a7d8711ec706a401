"""``nsrkit`` command-line entry point.

Exit codes: 0 success, 1 usage error (bad arguments or config), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .denoisers import DenoiserError, DenoiserSpec, TrainingError
from .engine import CheckpointError
from .harness.config import ConfigError, load_config
from .harness.corpus import save_corpus
from .harness.evaluate import (bicubic_upscaler, evaluate, read_report, recompute_report,
                               write_report)
from .harness.montage import write_eval_montages
from .harness.train import (build_dataset, ensure_pretrained, model_dir, run_paths, start_run,
                            train_dae_run, train_sr)
from .imaging import ImageError, load_png, save_png
from .models import load_model
from .noise import NoiseSpec, NoiseSpecError, corrupt, sub_seed

log = logging.getLogger("nsrkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def cmd_gen_corpus(args) -> int:
    cfg = load_config(args.config)
    root = start_run(cfg)
    ds = build_dataset(cfg)
    save_corpus(ds.train, root / "corpus" / "train")
    save_corpus(ds.val, root / "corpus" / "val")
    print(f"wrote {len(ds.train)} train + {len(ds.val)} val images to {root / 'corpus'}")
    return 0


def cmd_degrade(args) -> int:
    try:
        spec = NoiseSpec.parse(args.noise)
    except NoiseSpecError as exc:
        raise UsageError(str(exc)) from None
    src = Path(args.in_dir)
    files = sorted(src.glob("*.png"))
    if not files:
        raise ImageError(f"{src}: no PNG images found")
    out = Path(args.out)
    for i, f in enumerate(files):
        img = corrupt(load_png(f), spec.with_seed(sub_seed(spec.seed, i)))
        save_png(img, out / f.name)
    print(f"degraded {len(files)} images with {spec} into {out}")
    return 0


def cmd_train_dae(args) -> int:
    cfg = load_config(args.config)
    start_run(cfg)
    d = run_paths(cfg)["dae"]
    _, hist = train_dae_run(cfg, run_dir=d)
    final = hist[-1]["loss"] if hist else float("nan")
    print(f"DAE trained ({len(hist)} epochs, final loss {final:.6f}) -> {d / 'dae.ckpt'}")
    return 0


def cmd_train_sr(args) -> int:
    cfg = load_config(args.config)
    start_run(cfg)
    variant = args.variant.replace("-", "_")
    ckpt = None
    if args.denoiser == "dae":
        ckpt = run_paths(cfg)["dae"] / "dae.ckpt"
        if not ckpt.exists():
            raise TrainingError(f"missing DAE checkpoint {ckpt}; run `nsrkit train-dae` first")
    denoiser = DenoiserSpec(args.denoiser, window=cfg.denoiser_window,
                            dae_checkpoint=str(ckpt) if ckpt else None)
    if variant == "baseline" and args.denoiser != "identity":
        raise UsageError("the baseline variant takes no denoiser (use --denoiser identity)")
    ds = build_dataset(cfg)
    pretrained = ensure_pretrained(cfg, ds)
    out = model_dir(cfg, variant, args.denoiser)
    _, hist = train_sr(cfg, variant, denoiser, pretrained, ds, run_dir=out)
    best = max((h["val_psnr"] for h in hist), default=float("nan"))
    print(f"{variant}/{args.denoiser}: best val PSNR {best:.2f} dB -> {out / 'model.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    start_run(cfg)
    ds = build_dataset(cfg)
    models = {"bicubic": bicubic_upscaler(cfg.scale), "no-tuning": ensure_pretrained(cfg, ds)}
    for path in args.models:
        p = Path(path)
        name = p.parent.name if p.name == "model.ckpt" else p.stem
        models[name] = load_model(p)
    ev = run_paths(cfg)["eval"]
    report = evaluate(models, cfg.test_noise, ds.val, ds.val_lr, config_hash=cfg.hash(),
                      save_outputs=ev / "outputs")
    write_report(report, ev)
    write_eval_montages(ev / "outputs", ev / "montages")
    print(report.table(), end="")
    return 0


def cmd_sr(args) -> int:
    model = load_model(args.model)
    img = load_png(args.in_path)
    save_png(model.super_resolve([img])[0], args.out)
    print(f"{args.in_path} -> {args.out} (x{model.config.scale}, {model.config.variant})")
    return 0


def cmd_report(args) -> int:
    ev = Path(args.run) / "eval"
    src = read_report(ev / "report.json") if (ev / "report.json").exists() else None
    if (ev / "outputs" / "index.json").exists():
        report = recompute_report(ev / "outputs", config_hash=src.config_hash if src else "")
        if src is not None:
            for cell in report.cells:
                cell.runtime = src.cell(cell.model, cell.noise).runtime
    elif src is not None:
        report = src
    else:
        raise FileNotFoundError(f"{ev}: no report.json or persisted outputs; run `nsrkit eval` first")
    write_report(report, ev)
    print(report.table(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nsrkit", description="Joint denoising and super-resolution experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-corpus", help="write the configured corpus as PNGs")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_gen_corpus)

    s = sub.add_parser("degrade", help="corrupt every PNG in a directory")
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--noise", required=True, help="kind:param:seed, e.g. gaussian:0.1:7")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("train-dae", help="train the denoising autoencoder")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_train_dae)

    s = sub.add_parser("train-sr", help="pretrain (if needed) and fine-tune an SR model")
    s.add_argument("--config", required=True)
    s.add_argument("--variant", required=True, choices=["baseline", "pre-net", "in-net"])
    s.add_argument("--denoiser", default="identity", choices=["identity", "median", "wiener", "dae"])
    s.set_defaults(func=cmd_train_sr)

    s = sub.add_parser("eval", help="PSNR of trained models under every test noise")
    s.add_argument("--config", required=True)
    s.add_argument("--models", nargs="*", default=[], help="SR checkpoints to evaluate")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sr", help="super-resolve one PNG")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="in_path", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sr)

    s = sub.add_parser("report", help="rebuild the report table of a run directory")
    s.add_argument("--run", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"nsrkit: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"nsrkit: error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, CheckpointError, ImageError, DenoiserError, NoiseSpecError,
            FileNotFoundError, OSError, ValueError) as exc:
        print(f"nsrkit: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
