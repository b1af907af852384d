"""Command-line entry point: ``iqprompt <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 checkpoint
error, 5 numeric failure, 1 any other package error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch

from .config import ConfigError, RunConfig, dump_config, load_config
from .exceptions import (
    CorruptCheckpoint,
    CorruptDataset,
    IncompatibleCheckpoint,
    IQPromptError,
    NonFiniteGradient,
    NonFiniteLoss,
    UnsupportedFormat,
)
from .experiments import ablation_csv, ablation_text, bench_prompt, run_ablation
from .metrics import MetricsReport, evaluate_classifier
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.network import NetworkConfig, SignalLanguageModel
from .plots import KINDS, write_figures
from .sigio.benchmark import make_synthetic_benchmark
from .sigio.storage import load_dataset, save_dataset
from .trainer import denoise_eval, finetune_classifier, pretrain

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_IO, EXIT_CHECKPOINT, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5
SEED_ENV = "IQPROMPT_SEED"
THREADS_ENV = "IQPROMPT_THREADS"
SPLIT_FILES = {"train": "train.iq", "val": "val.iq", "test": "test.iq"}


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.io.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    return path


def _load_split(data_dir, split: str):
    return load_dataset(Path(data_dir) / SPLIT_FILES[split])


def _model_for(cfg: RunConfig, checkpoint, n_classes=None) -> SignalLanguageModel:
    if checkpoint is None:
        return SignalLanguageModel(NetworkConfig.from_run(cfg, n_classes=n_classes))
    model = load_checkpoint(checkpoint)
    _check_geometry(cfg, model)
    return model


def _check_geometry(cfg: RunConfig, model: SignalLanguageModel):
    """The checkpoint must agree with the config on every shape-determining key."""
    ref = NetworkConfig.from_run(cfg, n_classes=model.cfg.n_classes).geometry()
    got = model.cfg.geometry()
    diff = sorted(k for k in ref if ref[k] != got[k])
    if diff:
        raise IncompatibleCheckpoint(f"checkpoint conflicts with the config on {', '.join(diff)}")
    # Runtime switches follow the current config.
    model.cfg.hptr.enabled = cfg.hptr.enabled
    model.cfg.hptr.prefix = cfg.hptr.prefix
    model.cfg.hptr.top_k = cfg.hptr.top_k
    model.cfg.hptr.prompt_max_tokens = cfg.hptr.prompt_max_tokens
    model.cfg.faf.enabled = cfg.faf.enabled


def cmd_gen_data(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    splits = make_synthetic_benchmark(cfg.data)
    counts = {}
    for ds in splits:
        save_dataset(ds, out / SPLIT_FILES[ds.split_tag])
        counts[ds.split_tag] = len(ds)
    summary = {"config_hash": cfg.hash(), "counts": counts, "class_names": list(cfg.data.schemes),
               "files": {k: SPLIT_FILES[k] for k in counts}}
    _write(out / "dataset.json", json.dumps(summary, indent=1, sort_keys=True))
    _write(out / "config.yaml", dump_config(cfg))
    print(f"gen-data: train={counts['train']} val={counts['val']} test={counts['test']} -> {out}")
    return EXIT_OK


def cmd_pretrain(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    trains = [_load_split(d, "train") for d in args.data]
    vals = [_load_split(d, "val") for d in args.data]
    model = _model_for(cfg, args.checkpoint, n_classes=0)
    model, log = pretrain(model, trains, cfg.train, vals, checkpoint_path=out / "pretrain.ckpt")
    _write(out / "pretrain_log.csv", log.to_csv())
    _write(out / "pretrain_log.json", log.to_json())
    last = log.epochs[-1]
    print(f"pretrain: epochs={len(log.epochs)} val_loss={last.val_mean:.6g} "
          f"early_stop={log.early_stop_epoch} -> {out / 'pretrain.ckpt'}")
    return EXIT_OK


def cmd_finetune(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    train = _load_split(args.data, "train")
    test = _load_split(args.data, "test")
    model = _model_for(cfg, args.checkpoint)
    model, report, log = finetune_classifier(model, train, test, cfg.train, eval_batch_size=cfg.eval.batch_size)
    report.config_hash = cfg.hash()
    save_checkpoint(model, out / "finetune.ckpt", extra={"stage": "finetune", "run_config_hash": cfg.hash()})
    _write(out / "finetune_log.csv", log.to_csv())
    _write(out / "finetune_log.json", log.to_json())
    _write(out / "report_finetune.json", report.to_json())
    _write(out / "report_finetune.csv", report.to_csv())
    print(f"finetune: OA={report.oa:.4f} kappa={_fmt(report.kappa)} -> {out / 'finetune.ckpt'}")
    return EXIT_OK


def cmd_denoise(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    test = _load_split(args.data, "test")
    model = _model_for(cfg, args.checkpoint, n_classes=0)
    e = cfg.eval
    report = denoise_eval(model, test, e.snr_grid_db, seed=e.seed, ssim_window=e.ssim_window, k1=e.k1,
                          k2=e.k2, sg_window=e.sg_window, sg_polyorder=e.sg_polyorder, batch_size=e.batch_size)
    report.config_hash = cfg.hash()
    _write(out / "report_denoise.json", report.to_json())
    _write(out / "report_denoise.csv", report.to_csv())
    noisy = np.mean(list(report.per_snr_noisy_ssim.values()))
    print(f"denoise: SSIM={report.ssim_mean:.4f} noisy_SSIM={noisy:.4f} MSE={report.mse_mean:.6g}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    test = _load_split(args.data, "test")
    if args.predictor == "oracle":
        # Batches arrive in dataset order, so the true labels can be replayed.
        truth = test.labels()
        cursor = {"at": 0}

        def predict(xb):
            start = cursor["at"]
            cursor["at"] += len(xb)
            return truth[start: start + len(xb)]
    else:
        if args.checkpoint is None:
            raise ConfigError("eval needs --checkpoint unless --predictor oracle", "checkpoint")
        model = _model_for(cfg, args.checkpoint)
        if model.head is None:
            raise IncompatibleCheckpoint("checkpoint has no classification head")
        description = test.manifest.get("description")

        def predict(xb):
            return model.predict_labels(xb, cfg.eval.batch_size, description)
    report, _, _ = evaluate_classifier(predict, test, cfg.eval.batch_size)
    report.config_hash = cfg.hash()
    _write(out / "report_eval.json", report.to_json())
    _write(out / "report_eval.csv", report.to_csv())
    print(f"eval: OA={report.oa:.4f} kappa={_fmt(report.kappa)}")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    if args.data:
        train, val, test = (_load_split(args.data, s) for s in ("train", "val", "test"))
    else:
        train, val, test = make_synthetic_benchmark(cfg.data)
    rows = run_ablation(cfg, train, val, test,
                        progress=lambda r: print(f"  cell hptr={r['hptr']} faf={r['faf']}: {r['status']}",
                                                 flush=True))
    _write(out / "ablation.csv", ablation_csv(rows))
    text = ablation_text(rows)
    _write(out / "ablation.txt", text)
    print(text, end="")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NUMERIC


def cmd_bench_prompt(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    res = bench_prompt(cfg, args.batches, args.batch_size)
    res["config_hash"] = cfg.hash()
    _write(out / "bench_prompt.json", json.dumps(res, indent=1, sort_keys=True))
    print(f"bench-prompt: hybrid(K={res['hybrid_prompt_tokens']})={res['hybrid_seconds_per_batch']:.6f} s "
          f"hardware(L_T={res['hardware_prompt_tokens']})={res['hardware_seconds_per_batch']:.6f} s "
          f"diff={res['relative_difference_pct']:+.2f}%")
    return EXIT_OK


def cmd_plot(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.io.out_dir)
    written = []
    for path in args.reports:
        report = MetricsReport.from_json(Path(path).read_text())
        stem = Path(path).stem + "_" if len(args.reports) > 1 else ""
        written += write_figures(report, out, args.kind or None, stem)
    print(f"plot: wrote {len(written)} files -> {out}")
    return EXIT_OK


def _fmt(v):
    return "undefined" if v is None else f"{v:.4f}"


COMMANDS = {
    "gen-data": cmd_gen_data, "pretrain": cmd_pretrain, "finetune": cmd_finetune,
    "denoise": cmd_denoise, "eval": cmd_eval, "ablate": cmd_ablate,
    "bench-prompt": cmd_bench_prompt, "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run config")
    common.add_argument("--seed", type=int, help=f"seed for data and training (env {SEED_ENV})")
    common.add_argument("--out", help="output directory (io.out_dir)")
    common.add_argument("--threads", type=int, help=f"torch intra-op threads (env {THREADS_ENV})")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
    parser = argparse.ArgumentParser(prog="iqprompt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate the synthetic benchmark")
    p = sub.add_parser("pretrain", parents=[common], help="self-supervised pretraining")
    p.add_argument("--data", nargs="+", required=True, help="dataset directories from gen-data")
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    for name, text in (("finetune", "few-shot classification"), ("denoise", "denoising evaluation"),
                       ("eval", "classification evaluation")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--data", required=True, help="dataset directory from gen-data")
        p.add_argument("--checkpoint", help="model checkpoint")
        if name == "eval":
            p.add_argument("--predictor", choices=("model", "oracle"), default="model",
                           help="'oracle' returns the true labels (pipeline test hook)")
    p = sub.add_parser("ablate", parents=[common], help="prompting x fusion ablation grid")
    p.add_argument("--data", help="dataset directory (default: generate from the data section)")
    p = sub.add_parser("bench-prompt", parents=[common], help="hybrid vs hardware prompt latency")
    p.add_argument("--batches", type=int, help="timed batches (eval.bench_batches)")
    p.add_argument("--batch-size", type=int, help="frames per batch (eval.bench_batch_size)")
    p = sub.add_parser("plot", parents=[common], help="SVG + CSV figures from report JSON files")
    p.add_argument("reports", nargs="+", help="MetricsReport JSON files")
    p.add_argument("--kind", action="append", choices=KINDS, help="figure kind; repeatable")
    return parser


def resolve_config(args, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    overrides = list(args.set)
    seed = args.seed if args.seed is not None else environ.get(SEED_ENV)
    if seed is not None:
        try:
            seed = int(seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}", SEED_ENV)
        overrides = [f"data.seed={seed}", f"train.seed={seed}"] + overrides
    threads = args.threads if args.threads is not None else environ.get(THREADS_ENV)
    if threads is not None:
        try:
            threads = int(threads)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}", THREADS_ENV)
        overrides.append(f"io.threads={threads}")
    if args.out is not None:
        overrides.append(f"io.out_dir={json.dumps(str(args.out))}")
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.io.threads < 1:
            raise ConfigError("io.threads must be >= 1", "io.threads")
        torch.set_num_threads(cfg.io.threads)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IncompatibleCheckpoint, CorruptCheckpoint) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (NonFiniteLoss, NonFiniteGradient) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, UnsupportedFormat, CorruptDataset) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IQPromptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
