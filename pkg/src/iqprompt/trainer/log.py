"""Per-epoch training records with CSV and JSON serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    train_mse: dict
    val_loss: dict
    val_mean: float


@dataclass
class TrainLog:
    """Epoch records, the lr trace, the early-stop epoch and wall-clock seconds.

    Everything except ``wall_clock`` is deterministic for a fixed seed.
    """

    epochs: list = field(default_factory=list)
    early_stop_epoch: Optional[int] = None
    wall_clock: float = 0.0
    batches: list = field(default_factory=list)
    dataset_names: list = field(default_factory=list)

    @property
    def lr_trace(self) -> list:
        return [r.lr for r in self.epochs]

    @property
    def val_history(self) -> list:
        return [r.val_mean for r in self.epochs]

    @property
    def train_history(self) -> list:
        return [r.train_loss for r in self.epochs]

    def append(self, record: EpochRecord):
        if self.epochs and record.epoch != self.epochs[-1].epoch + 1:
            raise ValueError("epoch records must be consecutive")
        self.epochs.append(record)

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        d = {
            "dataset_names": list(self.dataset_names),
            "early_stop_epoch": self.early_stop_epoch,
            "epochs": [vars(r) for r in self.epochs],
            "lr_trace": self.lr_trace,
            "batches": list(self.batches),
        }
        if include_wall_clock:
            d["wall_clock"] = self.wall_clock
        return d

    def deterministic_view(self) -> dict:
        return self.to_dict(include_wall_clock=False)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainLog":
        d = json.loads(text)
        return cls(
            [EpochRecord(**r) for r in d["epochs"]], d["early_stop_epoch"],
            d.get("wall_clock", 0.0), d.get("batches", []), d.get("dataset_names", []),
        )

    def to_csv(self) -> str:
        names = self.dataset_names or sorted({k for r in self.epochs for k in r.val_loss})
        header = ["epoch", "lr", "train_loss", "val_mean"]
        header += [f"train_mse_{n}" for n in names] + [f"val_loss_{n}" for n in names]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in self.epochs:
            w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.val_mean)]
                       + [repr(r.train_mse.get(n, float("nan"))) for n in names]
                       + [repr(r.val_loss.get(n, float("nan"))) for n in names])
        return buf.getvalue()
