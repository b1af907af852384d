"""Few-shot classification fine-tuning."""

from __future__ import annotations

import time
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..config import TrainConfig
from ..exceptions import InsufficientShots, MissingLabels, NonFiniteLoss
from ..metrics import evaluate_classifier
from ..model.network import SignalLanguageModel
from ..nncore.optim import AdamW
from ..nncore.schedule import LRSchedule, schedule_lr
from ..sigio.benchmark import derive_seed
from ..sigio.frames import SignalDataset
from .log import EpochRecord, TrainLog

SCOPES = ("head", "head+adapters", "all")


def sample_shots(dataset: SignalDataset, shots: int, seed: int) -> np.ndarray:
    """Indices of exactly ``shots`` frames per class, drawn without replacement."""
    if not dataset.labeled:
        raise MissingLabels("few-shot sampling needs labelled frames")
    if shots < 1:
        raise InsufficientShots(f"shots must be >= 1, got {shots}")
    labels = dataset.labels()
    rng = np.random.default_rng(derive_seed(seed, 5))
    picked = []
    for c in range(len(dataset.class_names)):
        idx = np.flatnonzero(labels == c)
        if len(idx) < shots:
            raise InsufficientShots(
                f"class {dataset.class_names[c]!r} has {len(idx)} frames, fewer than {shots} shots"
            )
        picked.append(rng.choice(idx, size=shots, replace=False))
    return np.sort(np.concatenate(picked))


def _scope_params(model: SignalLanguageModel, scope: str):
    groups = model.parameter_groups()
    if scope == "head":
        return groups["head"]
    if scope == "head+adapters":
        return groups["head"] + groups["adapters"]
    return groups["head"] + groups["adapters"] + groups["pipeline"]


def finetune_classifier(
    model: SignalLanguageModel,
    train: SignalDataset,
    test: SignalDataset,
    cfg: TrainConfig,
    shots: Optional[int] = None,
    *,
    eval_batch_size: int = 128,
    scope: Optional[str] = None,
):
    """Train the head (and per ``scope`` the adapters / pipeline) with cross-entropy.

    The learning rate anneals on a cosine from ``cfg.finetune_lr`` to
    ``cfg.finetune_lr_floor``. Returns ``(model, MetricsReport, TrainLog)``;
    the report is measured on ``test`` only.
    """
    cfg.validate()
    scope = scope or cfg.finetune_scope
    shots = cfg.shots if shots is None else shots
    idx = sample_shots(train, shots, cfg.seed)
    n_classes = len(train.class_names)
    if model.head is None or model.head.out_features != n_classes:
        model.attach_head(n_classes)
    chosen = _scope_params(model, scope)
    chosen_ids = {id(p) for _, p in chosen}
    saved = {n: p.requires_grad for n, p in model.named_parameters()}
    for n, p in model.named_parameters():
        p.requires_grad_(id(p) in chosen_ids)

    description = train.manifest.get("description") or model.cfg.dataset_description
    x_all = train.as_array()[idx]
    y_all = torch.as_tensor(train.labels()[idx])
    ids_all, mask_all = model.prompts(x_all, "classify", description)
    x_all = torch.as_tensor(x_all).to(model.dtype)

    torch.manual_seed(derive_seed(cfg.seed, 6))
    opt = AdamW([p for _, p in chosen], lr=cfg.finetune_lr, weight_decay=cfg.weight_decay)
    schedule = LRSchedule("cosine_annealing", cfg.finetune_lr, cfg.finetune_epochs, floor=cfg.finetune_lr_floor)
    log = TrainLog(dataset_names=[train.manifest.get("name", "train")])
    t0 = time.perf_counter()
    try:
        model.train()
        for epoch in range(cfg.finetune_epochs):
            lr = schedule_lr(schedule, epoch)
            opt.lr = lr
            order = np.random.default_rng(derive_seed(cfg.seed, 7, epoch)).permutation(len(idx))
            total, correct = 0.0, 0
            for k, s in enumerate(range(0, len(order), cfg.batch_size)):
                sel = torch.as_tensor(order[s: s + cfg.batch_size])
                logits = model.logits(x_all[sel], ids_all[sel], mask_all[sel])
                loss = nn.functional.cross_entropy(logits, y_all[sel])
                if not torch.isfinite(loss):
                    raise NonFiniteLoss(f"non-finite loss in batch {(epoch, 0, k)}", batch_id=(epoch, 0, k))
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += float(loss.detach()) * len(sel)
                correct += int((logits.argmax(-1) == y_all[sel]).sum())
            # train_mse holds the training error rate here; there is no validation split.
            name = log.dataset_names[0]
            mean = total / len(idx)
            log.append(EpochRecord(epoch, lr, mean, {name: 1.0 - correct / len(idx)}, {}, mean))
    finally:
        for n, p in model.named_parameters():
            p.requires_grad_(saved[n])
        model.eval()
    log.wall_clock = time.perf_counter() - t0
    report, _, _ = evaluate_classifier(
        lambda xb: model.predict_labels(xb, eval_batch_size, description), test, eval_batch_size
    )
    report.config_hash = model.cfg.hash()
    return model, report, log
