"""Classification and reconstruction metrics plus report assembly."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    DegenerateKappa,
    DegenerateReference,
    InvalidArgument,
    MissingLabels,
    ShapeMismatch,
)
from .sigio.frames import NOISELESS, IQFrame, SignalDataset

K1 = 0.01
K2 = 0.03
SSIM_WINDOW = 11


@dataclass
class ConfusionMatrix:
    """Counts ``n[i, j]`` of samples with true class ``i`` predicted as ``j``."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeMismatch(f"confusion matrix must be square, got shape {c.shape}")
        if c.size and (c < 0).any():
            raise InvalidArgument("confusion counts must be non-negative")
        self.counts = c.astype(np.int64)

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: Optional[int] = None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ShapeMismatch("y_true and y_pred differ in length")
        k = n_classes or int(max(y_true.max(initial=-1), y_pred.max(initial=-1)) + 1)
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def k(self) -> int:
        return self.counts.shape[0]


def _counts(cm) -> np.ndarray:
    c = cm.counts if isinstance(cm, ConfusionMatrix) else ConfusionMatrix(np.asarray(cm)).counts
    if c.size == 0 or c.sum() < 1:
        raise InvalidArgument("metric needs a confusion matrix with at least one sample")
    return c


def overall_accuracy(cm) -> float:
    c = _counts(cm)
    return float(np.trace(c) / c.sum())


def chance_agreement(cm) -> float:
    c = _counts(cm)
    n = int(c.sum())
    rc = sum(int(r) * int(col) for r, col in zip(c.sum(axis=1), c.sum(axis=0)))
    return rc / (n * n)


def kappa(cm) -> float:
    """Cohen's kappa ``(OA - PE) / (1 - PE)``, evaluated in exact integer arithmetic."""
    c = _counts(cm)
    n = int(c.sum())
    diag = int(np.trace(c))
    rc = sum(int(r) * int(col) for r, col in zip(c.sum(axis=1), c.sum(axis=0)))
    if rc == n * n:
        raise DegenerateKappa("chance agreement is 1; kappa is undefined")
    return (n * diag - rc) / (n * n - rc)


def _check_pair(x: IQFrame, y: IQFrame):
    if len(x) != len(y):
        raise ShapeMismatch(f"frames differ in length: {len(x)} vs {len(y)}")


def mse(x: IQFrame, y: IQFrame) -> float:
    _check_pair(x, y)
    a = x.as_array().astype(np.float64)
    b = y.as_array().astype(np.float64)
    return float(np.mean((a - b) ** 2))


def dynamic_ranges(x: IQFrame):
    """Per-channel ``max - min`` of the reference, borrowing across channels when one is flat."""
    ri = float(np.max(x.i) - np.min(x.i))
    rq = float(np.max(x.q) - np.min(x.q))
    if ri == 0 and rq == 0:
        raise DegenerateReference("reference frame is constant on both channels")
    return (ri or rq), (rq or ri)


def _ssim_channel(x: np.ndarray, y: np.ndarray, w: int, c1: float, c2: float) -> np.ndarray:
    xw = sliding_window_view(x, w)
    yw = sliding_window_view(y, w)
    mx = xw.mean(axis=1)
    my = yw.mean(axis=1)
    vx = ((xw - mx[:, None]) ** 2).mean(axis=1)
    vy = ((yw - my[:, None]) ** 2).mean(axis=1)
    cxy = ((xw - mx[:, None]) * (yw - my[:, None])).mean(axis=1)
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def ssim_1d(
    x: IQFrame,
    y: IQFrame,
    window_w: int = SSIM_WINDOW,
    k1: float = K1,
    k2: float = K2,
    value_range: Optional[float] = None,
) -> float:
    """Mean windowed SSIM of ``y`` against the reference ``x`` over I and Q.

    Uniform windows of width ``window_w`` slide with stride 1 over valid
    positions. The dynamic range defaults to the per-channel span of ``x``;
    ``value_range`` pins it for both channels.
    """
    _check_pair(x, y)
    if window_w < 1 or window_w % 2 != 1 or window_w > len(x):
        raise InvalidArgument(f"window_w must be odd and <= {len(x)}, got {window_w}")
    ranges = (value_range, value_range) if value_range is not None else dynamic_ranges(x)
    vals = []
    for a, b, lr in ((x.i, y.i, ranges[0]), (x.q, y.q, ranges[1])):
        c1 = (k1 * lr) ** 2
        c2 = (k2 * lr) ** 2
        vals.append(_ssim_channel(a.astype(np.float64), b.astype(np.float64), window_w, c1, c2))
    return float(np.mean(np.concatenate(vals)))


def snr_key(snr) -> str:
    if snr is None:
        return "none"
    if snr == NOISELESS:
        return "noiseless"
    return f"{float(snr):g}"


def _snr_sort_key(key: str):
    if key == "noiseless":
        return (1, math.inf)
    if key == "none":
        return (2, 0.0)
    return (0, float(key))


@dataclass
class MetricsReport:
    oa: Optional[float] = None
    kappa: Optional[float] = None
    per_snr_oa: Dict[str, float] = field(default_factory=dict)
    ssim_mean: Optional[float] = None
    mse_mean: Optional[float] = None
    seconds_per_batch: Optional[float] = None
    batch_size: Optional[int] = None
    per_snr_ssim: Dict[str, float] = field(default_factory=dict)
    per_snr_noisy_ssim: Dict[str, float] = field(default_factory=dict)
    per_snr_sg_ssim: Dict[str, float] = field(default_factory=dict)
    per_snr_mse: Dict[str, float] = field(default_factory=dict)
    confusion: Optional[list] = None
    class_names: Optional[list] = None
    config_hash: Optional[str] = None
    units: Dict[str, str] = field(
        default_factory=lambda: {"seconds_per_batch": "s", "snr": "dB", "oa": "fraction"}
    )

    def __post_init__(self):
        if self.oa is not None and not 0.0 <= self.oa <= 1.0:
            raise InvalidArgument(f"oa {self.oa} outside [0, 1]")
        if self.kappa is not None and not -1.0 <= self.kappa <= 1.0:
            raise InvalidArgument(f"kappa {self.kappa} outside [-1, 1]")
        if self.ssim_mean is not None and not -1.0 <= self.ssim_mean <= 1.0:
            raise InvalidArgument(f"ssim_mean {self.ssim_mean} outside [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))

    def snr_keys(self):
        keys = set()
        for m in (self.per_snr_oa, self.per_snr_ssim, self.per_snr_noisy_ssim,
                  self.per_snr_sg_ssim, self.per_snr_mse):
            keys.update(m)
        return sorted(keys, key=_snr_sort_key)

    def csv_rows(self):
        """One row per SNR point, columns present only when measured."""
        cols = [("oa", self.per_snr_oa), ("ssim", self.per_snr_ssim),
                ("noisy_ssim", self.per_snr_noisy_ssim), ("sg_ssim", self.per_snr_sg_ssim),
                ("mse", self.per_snr_mse)]
        cols = [(name, m) for name, m in cols if m]
        header = ["snr_db"] + [name for name, _ in cols]
        rows = [header]
        for key in self.snr_keys():
            rows.append([key] + [_fmt(m.get(key)) for _, m in cols])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def evaluate_classifier(
    predict_fn: Callable[[np.ndarray], np.ndarray],
    dataset: SignalDataset,
    batch_size: int = 128,
):
    """Run ``predict_fn`` over ``dataset`` in batches of ``(B, 2, L)`` arrays.

    Returns ``(report, confusion_matrix, per_snr_curve)``.
    """
    if not dataset.labeled:
        raise MissingLabels("evaluate_classifier needs every frame labelled")
    x = dataset.as_array()
    y = dataset.labels()
    preds = []
    times = []
    for start in range(0, len(x), batch_size):
        t0 = time.perf_counter()
        p = np.asarray(predict_fn(x[start: start + batch_size]))
        times.append(time.perf_counter() - t0)
        preds.append(p.reshape(-1))
    y_pred = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    cm = ConfusionMatrix.from_labels(y, y_pred, len(dataset.class_names))
    snrs = [snr_key(f.snr_db) for f in dataset.frames]
    curve = {}
    for key in sorted(set(snrs), key=_snr_sort_key):
        mask = np.array([s == key for s in snrs])
        curve[key] = float(np.mean(y_pred[mask] == y[mask]))
    try:
        kap = kappa(cm)
    except DegenerateKappa:
        kap = None
    report = MetricsReport(
        oa=overall_accuracy(cm),
        kappa=kap,
        per_snr_oa=curve,
        seconds_per_batch=float(np.mean(times)) if times else None,
        batch_size=batch_size,
        confusion=cm.counts.tolist(),
        class_names=list(dataset.class_names),
    )
    return report, cm, curve
