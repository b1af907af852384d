"""Multi-dataset self-supervised pretraining with balanced losses and early stopping."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..config import TrainConfig
from ..exceptions import InvalidArgument, NonFiniteLoss
from ..model.checkpoint import capture_rng, save_checkpoint
from ..model.network import SignalLanguageModel
from ..nncore.optim import AdamW
from ..nncore.schedule import LRSchedule, schedule_lr, should_stop
from ..sigio.benchmark import derive_seed
from ..sigio.frames import SignalDataset
from .balancing import derive_balancing_factors
from .corrupt import corrupt_awgn, corrupt_mask, mask_span
from .log import EpochRecord, TrainLog

TASKS = ("denoise", "mask")
# Prompt task instruction used for each pretext task.
PROMPT_TASK = {"denoise": "denoise", "mask": "recover"}


@dataclass
class Batch:
    batch_id: tuple
    dataset: int
    task: str
    x: np.ndarray
    target: np.ndarray
    where: Optional[np.ndarray]


def _description(ds: SignalDataset, model: SignalLanguageModel) -> str:
    return ds.manifest.get("description") or model.cfg.dataset_description


def _check_lengths(datasets, model):
    lengths = {d.length for d in datasets}
    if len(lengths) != 1:
        raise InvalidArgument(f"pretraining datasets differ in frame length: {sorted(lengths)}")
    if lengths.pop() != model.cfg.length:
        raise InvalidArgument("dataset frame length differs from the model's configured length")


def _corrupt(x, task, rng, cfg: TrainConfig, model: SignalLanguageModel):
    if task == "denoise":
        snrs = rng.choice(np.asarray(cfg.pretrain_snr_grid_db, dtype=np.float64), size=len(x))
        seeds = rng.integers(0, 2**62, size=len(x))
        return corrupt_awgn(x, snrs, seeds), None
    h = model.cfg.hptr
    span = mask_span(model.n_patches, cfg.mask_ratio)
    starts = rng.integers(0, model.n_patches - span + 1, size=len(x))
    return corrupt_mask(x, starts, span, h.patch_len, h.stride)


def plan_epoch(datasets, cfg: TrainConfig, epoch: int, model) -> list:
    """Deterministic batch schedule for one epoch, interleaving datasets round-robin."""
    per = []
    for i, ds in enumerate(datasets):
        arr = ds.as_array()
        order = np.random.default_rng(derive_seed(cfg.seed, 1, epoch, i)).permutation(len(ds))
        chunks = [order[s: s + cfg.batch_size] for s in range(0, len(order), cfg.batch_size)]
        per.append([(i, k, arr[idx]) for k, idx in enumerate(chunks)])
    batches = []
    for r in range(max(len(p) for p in per)):
        for p in per:
            if r < len(p):
                i, k, clean = p[r]
                rng = np.random.default_rng(derive_seed(cfg.seed, 2, epoch, i, k))
                task = "denoise" if rng.random() < cfg.denoise_weight else "mask"
                x, where = _corrupt(clean, task, rng, cfg, model)
                batches.append(Batch((epoch, i, k), i, task, x.astype(np.float32), clean, where))
    return batches


def validation_batches(datasets, cfg: TrainConfig, model) -> list:
    """Fixed corrupted copies of each validation set, alternating the two tasks by frame."""
    out = []
    tasks = [t for t, w in zip(TASKS, (cfg.denoise_weight, cfg.mask_weight)) if w > 0]
    for i, ds in enumerate(datasets):
        arr = ds.as_array()
        items = []
        for t_idx, task in enumerate(tasks):
            sel = np.arange(t_idx, len(arr), len(tasks))
            if len(sel) == 0:
                continue
            rng = np.random.default_rng(derive_seed(cfg.seed, 3, i, t_idx))
            x, where = _corrupt(arr[sel], task, rng, cfg, model)
            items.append(Batch(("val", i, t_idx), i, task, x.astype(np.float32), arr[sel], where))
        out.append(items)
    return out


def batch_mse(out: torch.Tensor, target: torch.Tensor, where=None) -> torch.Tensor:
    err = (out - target) ** 2
    if where is not None:
        w = torch.as_tensor(where)
        return err[w].mean()
    return err.mean()


def _forward(model, b: Batch, description: str):
    x = torch.as_tensor(b.x).to(model.dtype)
    ids, mask = model.prompts(x, PROMPT_TASK[b.task], description)
    return model.reconstruct(x, ids, mask)


def evaluate_validation(model, val_batches, cfg: TrainConfig, descriptions, chunk: int = 128) -> list:
    was = model.training
    model.eval()
    losses = []
    with torch.no_grad():
        for i, items in enumerate(val_batches):
            total, count = 0.0, 0
            for b in items:
                for s in range(0, len(b.x), chunk):
                    piece = Batch(b.batch_id, b.dataset, b.task, b.x[s: s + chunk], b.target[s: s + chunk],
                                  None if b.where is None else b.where[s: s + chunk])
                    out = _forward(model, piece, descriptions[i])
                    where = piece.where if (cfg.masked_only_loss and piece.where is not None) else None
                    mse = batch_mse(out, torch.as_tensor(piece.target).to(out.dtype), where)
                    n = len(piece.x)
                    total += float(mse) * n
                    count += n
            losses.append(total / max(count, 1))
    model.train(was)
    return losses


def pretrain(
    model: SignalLanguageModel,
    datasets: Sequence[SignalDataset],
    cfg: TrainConfig,
    val_datasets: Optional[Sequence[SignalDataset]] = None,
    *,
    dry_run: bool = False,
    record_batches: bool = False,
    val_loss_injector: Optional[Callable[[int], float]] = None,
    checkpoint_path=None,
    restore_best: bool = True,
    progress: Optional[Callable[[EpochRecord], None]] = None,
):
    """Train the non-frozen parameters on denoising / masking pretext tasks.

    Each batch comes from one dataset ``i`` and its loss is ``b_i`` times the
    reconstruction MSE against the clean frames. ``dry_run`` runs the forward
    passes without optimizer steps; ``record_batches`` keeps per-batch
    losses in the log. ``val_loss_injector(epoch)`` replaces the measured
    validation loss, for exercising the schedule rules. Returns
    ``(model, TrainLog)``.
    """
    cfg.validate()
    datasets = list(datasets)
    if not datasets:
        raise InvalidArgument("pretraining needs at least one dataset")
    val_datasets = list(val_datasets) if val_datasets is not None else datasets
    if len(val_datasets) != len(datasets):
        raise InvalidArgument("one validation set is required per training dataset")
    _check_lengths(datasets + val_datasets, model)
    factors = list(cfg.balancing) if cfg.balancing is not None else derive_balancing_factors(datasets)
    if len(factors) != len(datasets):
        raise InvalidArgument(f"{len(factors)} balancing factors for {len(datasets)} datasets")
    names = [d.manifest.get("name", f"dataset{i}") + (f"_{i}" if len(datasets) > 1 else "")
             for i, d in enumerate(datasets)]
    descriptions = [_description(d, model) for d in datasets]

    torch.manual_seed(derive_seed(cfg.seed, 4))
    params = model.trainable_parameters()
    opt_names = [n for n, p in params if p.requires_grad]
    opt = AdamW([p for _, p in params], lr=cfg.lr, weight_decay=cfg.weight_decay)
    schedule = LRSchedule("warmup_linear_decay", cfg.lr, cfg.epochs, cfg.warmup_fraction, cfg.patience_halve)
    val_batches = validation_batches(val_datasets, cfg, model) if val_loss_injector is None else None

    log = TrainLog(dataset_names=names)
    best, best_state = float("inf"), None
    t0 = time.perf_counter()
    model.train()
    for epoch in range(cfg.epochs):
        lr = schedule_lr(schedule, epoch, log.val_history)
        opt.lr = lr
        sums = np.zeros(len(datasets))
        counts = np.zeros(len(datasets))
        weighted = []
        for b in plan_epoch(datasets, cfg, epoch, model):
            out = _forward(model, b, descriptions[b.dataset])
            where = b.where if (cfg.masked_only_loss and b.where is not None) else None
            raw = batch_mse(out, torch.as_tensor(b.target).to(out.dtype), where)
            loss = factors[b.dataset] * raw
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"non-finite loss in batch {b.batch_id}", batch_id=b.batch_id)
            if record_batches:
                log.batches.append({"batch_id": list(b.batch_id), "task": b.task,
                                    "loss": float(loss.detach()), "mse": float(raw.detach())})
            if not dry_run:
                opt.zero_grad()
                loss.backward()
                opt.step()
            sums[b.dataset] += float(raw.detach()) * len(b.x)
            counts[b.dataset] += len(b.x)
            weighted.append(float(loss.detach()))
        train_mse = {n: float(s / c) for n, s, c in zip(names, sums, counts)}
        if val_loss_injector is not None:
            val_mean = float(val_loss_injector(epoch))
            val = {n: val_mean for n in names}
        else:
            losses = evaluate_validation(model, val_batches, cfg, descriptions)
            val = dict(zip(names, losses))
            val_mean = float(np.mean(losses))
        record = EpochRecord(epoch, lr, float(np.mean(weighted)), train_mse, val, val_mean)
        log.append(record)
        if progress is not None:
            progress(record)
        if restore_best and val_mean < best:
            best = val_mean
            best_state = {n: p.detach().clone() for n, p in params}
        if should_stop(log.val_history, cfg.patience_stop):
            log.early_stop_epoch = epoch
            break
    if restore_best and best_state is not None and not dry_run:
        with torch.no_grad():
            for n, p in params:
                p.copy_(best_state[n])
    log.wall_clock = time.perf_counter() - t0
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, optimizer=opt, optimizer_param_names=opt_names,
                        epoch=len(log.epochs), rng=capture_rng(),
                        extra={"train_config": copy.deepcopy(vars(cfg)), "stage": "pretrain"})
    return model, log
