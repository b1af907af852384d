"""Hardware prompt text: dataset description, task instruction, per-frame statistics.

The three blocks always appear in this order, each opened by its delimiter::

    <|dataset|> {dataset description}
    <|task|> {task instruction}
    <|statistics|> Input statistics: min value ..., max value ..., median value ...,
    the trend of input is {upward|downward|flat}, top 5 lags are: [...]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgument
from ..sigio.frames import IQFrame

DATASET_TAG = "<|dataset|>"
TASK_TAG = "<|task|>"
STATS_TAG = "<|statistics|>"
DELIMITERS = (DATASET_TAG, TASK_TAG, STATS_TAG)

N_TOP_LAGS = 5
FLAT_SLOPE = 1e-9

TASK_DESCRIPTIONS = {
    "denoise": (
        "Remove the additive white Gaussian noise from the received IQ signal and "
        "output the clean in-phase and quadrature waveform."
    ),
    "recover": (
        "Some segments of the received IQ signal are missing. Reconstruct the "
        "complete in-phase and quadrature waveform."
    ),
    "classify": (
        "Identify the modulation scheme of the received IQ signal from its "
        "in-phase and quadrature samples."
    ),
}


@dataclass(frozen=True)
class FrameStatistics:
    minimum: float
    maximum: float
    median: float
    slope: float
    top_lags: tuple

    @property
    def trend(self) -> str:
        if abs(self.slope) < FLAT_SLOPE:
            return "flat"
        return "upward" if self.slope > 0 else "downward"


def autocorrelation(i: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Real part of the complex autocorrelation of the mean-removed signal, lags ``0..N-1``."""
    i = i.astype(np.float64) - np.mean(i)
    q = q.astype(np.float64) - np.mean(q)
    n = i.shape[0]
    full = np.correlate(i, i, "full") + np.correlate(q, q, "full")
    return full[n - 1:]


def top_lags(i: np.ndarray, q: np.ndarray, k: int = N_TOP_LAGS) -> tuple:
    """Lags >= 1 with the ``k`` largest autocorrelation magnitudes; ties go to smaller lags."""
    r = np.abs(autocorrelation(i, q)[1:])
    order = np.argsort(-r, kind="stable")[:k]
    return tuple(int(lag) + 1 for lag in order)


def frame_statistics(frame: IQFrame) -> FrameStatistics:
    values = np.concatenate([frame.i, frame.q]).astype(np.float64)
    power = frame.i.astype(np.float64) ** 2 + frame.q.astype(np.float64) ** 2
    n = power.shape[0]
    if n > 1:
        t = np.arange(n, dtype=np.float64)
        t -= t.mean()
        slope = float(np.dot(t, power - power.mean()) / np.dot(t, t))
    else:
        slope = 0.0
    return FrameStatistics(
        float(values.min()), float(values.max()), float(np.median(values)),
        slope, top_lags(frame.i, frame.q),
    )


def _clean(desc: str) -> str:
    for tag in DELIMITERS:
        desc = desc.replace(tag, "")
    return " ".join(desc.split())


def statistics_text(stats: FrameStatistics) -> str:
    lags = ", ".join(str(x) for x in stats.top_lags)
    return (
        f"Input statistics: min value {stats.minimum:.3f}, max value {stats.maximum:.3f}, "
        f"median value {stats.median:.3f}, the trend of input is {stats.trend}, "
        f"top {len(stats.top_lags)} lags are: [{lags}]"
    )


def build_prompt_text(dataset_desc: str, task_desc: str, frame: IQFrame) -> str:
    """Concatenate the dataset, task and statistics blocks for ``frame``."""
    dataset_desc = _clean(dataset_desc)
    task_desc = _clean(task_desc)
    if not dataset_desc or not task_desc:
        raise InvalidArgument("dataset and task descriptions must be non-empty")
    return (
        f"{DATASET_TAG} {dataset_desc}\n"
        f"{TASK_TAG} {task_desc}\n"
        f"{STATS_TAG} {statistics_text(frame_statistics(frame))}"
    )


def task_description(task: str) -> str:
    try:
        return TASK_DESCRIPTIONS[task]
    except KeyError:
        raise InvalidArgument(f"unknown task {task!r}; expected one of {sorted(TASK_DESCRIPTIONS)}")
