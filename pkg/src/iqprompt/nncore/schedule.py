"""Per-epoch learning-rate schedules and the plateau / early-stop rules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..exceptions import InvalidArgument

KINDS = ("warmup_linear_decay", "cosine_annealing", "plateau_halving")


@dataclass(frozen=True)
class LRSchedule:
    kind: str = "warmup_linear_decay"
    base_lr: float = 5e-5
    epochs: int = 50
    warmup_fraction: float = 0.1
    patience: int = 5
    floor: float = 0.0
    halve_on_plateau: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"schedule kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidArgument("warmup_fraction must lie in [0, 1)")
        if self.patience < 1:
            raise InvalidArgument("patience must be >= 1")
        if self.epochs < 1:
            raise InvalidArgument("epochs must be >= 1")

    @property
    def warmup_epochs(self) -> int:
        return int(round(self.warmup_fraction * self.epochs))


def plateau_halvings(val_loss_history: Sequence[float], patience: int) -> int:
    """Number of halvings triggered so far.

    A halving fires on the epoch that completes ``patience`` consecutive
    epochs without a new best loss; the stagnation counter then restarts.
    """
    best = math.inf
    bad = 0
    count = 0
    for v in val_loss_history:
        if v < best:
            best = v
            bad = 0
        else:
            bad += 1
            if bad == patience:
                count += 1
                bad = 0
    return count


def epochs_since_best(val_loss_history: Sequence[float]) -> int:
    best = math.inf
    since = 0
    for v in val_loss_history:
        if v < best:
            best = v
            since = 0
        else:
            since += 1
    return since


def should_stop(val_loss_history: Sequence[float], patience: int = 20) -> bool:
    """True once the loss has not improved for ``patience`` consecutive epochs."""
    return epochs_since_best(val_loss_history) >= patience


def schedule_lr(schedule: LRSchedule, epoch: int, val_loss_history: Sequence[float] = ()) -> float:
    """Learning rate for ``epoch`` given validation losses of the epochs before it."""
    if epoch < 0:
        raise InvalidArgument("epoch must be >= 0")
    base = schedule.base_lr
    e_cap = schedule.epochs
    if schedule.kind == "warmup_linear_decay":
        w = schedule.warmup_epochs
        if epoch < w:
            lr = base * (epoch + 1) / w
        else:
            lr = base * max(0.0, (e_cap - epoch) / (e_cap - w))
    elif schedule.kind == "cosine_annealing":
        if e_cap == 1:
            lr = base
        else:
            t = min(epoch, e_cap - 1) / (e_cap - 1)
            lr = schedule.floor + (base - schedule.floor) * 0.5 * (1.0 + math.cos(math.pi * t))
        if epoch == e_cap - 1:
            lr = schedule.floor
    else:
        lr = base
    if schedule.kind == "plateau_halving" or (
        schedule.halve_on_plateau and schedule.kind == "warmup_linear_decay"
    ):
        lr *= 0.5 ** plateau_halvings(list(val_loss_history)[:epoch], schedule.patience)
    return lr
