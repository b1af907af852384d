"""Prompt-length latency benchmark and the prompting / fusion ablation grid."""

from __future__ import annotations

import copy
import csv
import io
import math
import time
from typing import Callable, Optional

import numpy as np
import torch

from .config import RunConfig
from .exceptions import IQPromptError
from .model.network import NetworkConfig, SignalLanguageModel
from .sigio.benchmark import derive_seed, make_synthetic_benchmark
from .trainer import denoise_eval, finetune_classifier, pretrain

ABLATION_COLUMNS = ("hptr", "faf", "oa", "kappa", "ssim", "seconds_per_batch", "identity_checks", "status")


def _bench_frames(run: RunConfig, n: int, seed: int) -> np.ndarray:
    data = copy.deepcopy(run.data)
    data.frames_per_cell = max(10, math.ceil(n / len(data.schemes) / max(len(data.snr_grid_db), 1)) + 2)
    train, _, _ = make_synthetic_benchmark(data, seed=seed)
    x = train.as_array()
    return x[np.random.default_rng(seed).permutation(len(x))]


def bench_prompt(run: RunConfig, n_batches: Optional[int] = None, batch_size: Optional[int] = None,
                 seed: Optional[int] = None) -> dict:
    """Mean forward seconds per batch with the hybrid prefix versus the full hardware prompt.

    One model serves both modes; the two are timed alternately on the same
    batches so drift affects them equally. Prompt tokenization is excluded.
    """
    n_batches = n_batches or run.eval.bench_batches
    batch_size = batch_size or run.eval.bench_batch_size
    seed = run.eval.seed if seed is None else seed
    net = NetworkConfig.from_run(copy.deepcopy(run), n_classes=0)
    net.hptr.enabled = True
    model = SignalLanguageModel(net).eval()
    frames = _bench_frames(run, batch_size * min(n_batches, 8), seed)
    pool = []
    for s in range(0, len(frames) - batch_size + 1, batch_size):
        x = torch.as_tensor(frames[s: s + batch_size])
        ids, mask = model.prompts(x, "denoise")
        pool.append((x, ids, mask))
    times = {"hybrid": [], "hardware": []}
    with torch.no_grad():
        for mode in times:
            net.hptr.prefix = mode
            model.reconstruct(*pool[0])
        for b in range(n_batches):
            order = ("hybrid", "hardware") if b % 2 == 0 else ("hardware", "hybrid")
            x, ids, mask = pool[b % len(pool)]
            for mode in order:
                net.hptr.prefix = mode
                t0 = time.perf_counter()
                model.reconstruct(x, ids, mask)
                times[mode].append(time.perf_counter() - t0)
    hy = float(np.mean(times["hybrid"]))
    hw = float(np.mean(times["hardware"]))
    return {
        "hybrid_seconds_per_batch": hy,
        "hardware_seconds_per_batch": hw,
        "hybrid_prompt_tokens": net.hptr.top_k,
        "hardware_prompt_tokens": int(pool[0][1].shape[1]),
        "relative_difference_pct": 100.0 * (hw - hy) / hw,
        "batches": n_batches,
        "batch_size": batch_size,
        "units": {"seconds_per_batch": "s", "relative_difference_pct": "% of hardware latency"},
    }


def zero_adapter_identity(model: SignalLanguageModel, x) -> bool:
    """With untrained (zero) adapters, enabling or removing them gives bit-identical output."""
    with torch.no_grad():
        ids, mask = model.prompts(x)
        enc = model.encode(x, ids, mask, run_backbone=False)
        prefix, tokens = enc.prefix, enc.fused
        model.backbone.set_adapters(True)
        a = model.backbone(prefix, tokens)
        model.backbone.set_adapters(False)
        b = model.backbone(prefix, tokens)
        model.backbone.set_adapters(True)
    return all(torch.equal(u, v) for u, v in zip(a, b))


def faf_bypass_identity(net: NetworkConfig, x) -> bool:
    """A fusion-disabled model matches a model built without the fusion branch, bit for bit."""
    net = copy.deepcopy(net)
    net.faf.enabled = False
    with torch.no_grad():
        a = SignalLanguageModel(net).eval()
        b = SignalLanguageModel(net, build_faf=False).eval()
        ids, mask = a.prompts(x)
        return torch.equal(a.reconstruct(x, ids, mask), b.reconstruct(x, ids, mask))


def run_ablation(run: RunConfig, train, val, test, progress: Optional[Callable[[dict], None]] = None) -> list:
    """Train and score the 2 x 2 grid {prompting on/off} x {fusion on/off}.

    Each cell gets a fresh model from the same derived seed, is pretrained,
    fine-tuned for classification, and evaluated for OA / kappa on ``test``
    and mean SSIM over ``eval.snr_grid_db``. A failing cell is reported with
    its error in ``status`` and NaN metrics.
    """
    rows = []
    probe = torch.as_tensor(test.as_array()[: min(4, len(test))])
    seed = derive_seed(run.train.seed, 8)
    for hptr_on in (False, True):
        for faf_on in (False, True):
            cell = copy.deepcopy(run)
            cell.hptr.enabled = hptr_on
            cell.faf.enabled = faf_on
            row = {"hptr": "on" if hptr_on else "off", "faf": "on" if faf_on else "off",
                   "oa": math.nan, "kappa": math.nan, "ssim": math.nan, "seconds_per_batch": math.nan,
                   "identity_checks": "", "status": "ok"}
            try:
                net = NetworkConfig.from_run(cell, seed=seed)
                model = SignalLanguageModel(net)
                checks = {"zero_adapter": zero_adapter_identity(model, probe)}
                if not faf_on:
                    checks["faf_bypass"] = faf_bypass_identity(net, probe)
                row["identity_checks"] = ";".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in checks.items())
                model, _ = pretrain(model, [train], cell.train, [val])
                model, report, _ = finetune_classifier(model, train, test, cell.train,
                                                       eval_batch_size=cell.eval.batch_size)
                den = denoise_eval(model, test, cell.eval.snr_grid_db, seed=cell.eval.seed,
                                   ssim_window=cell.eval.ssim_window, k1=cell.eval.k1, k2=cell.eval.k2,
                                   sg_window=cell.eval.sg_window, sg_polyorder=cell.eval.sg_polyorder,
                                   batch_size=cell.eval.batch_size)
                row.update(oa=report.oa, kappa=report.kappa if report.kappa is not None else math.nan,
                           ssim=den.ssim_mean, seconds_per_batch=report.seconds_per_batch)
            except (IQPromptError, ArithmeticError) as exc:
                row["status"] = f"failed: {type(exc).__name__}: {exc}"
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def ablation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ABLATION_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else repr(float(r[c])) for c in ABLATION_COLUMNS])
    return buf.getvalue()


def ablation_text(rows) -> str:
    lines = [f"{'HPTR':<5} {'FAF':<5} {'OA (%)':>8} {'Kappa':>8} {'SSIM':>7} {'s/batch':>9}  status"]
    for r in rows:
        lines.append(
            f"{r['hptr']:<5} {r['faf']:<5} {100 * r['oa']:>8.2f} {r['kappa']:>8.4f} {r['ssim']:>7.3f} "
            f"{r['seconds_per_batch']:>9.4f}  {r['status']}"
        )
    return "\n".join(lines) + "\n"
