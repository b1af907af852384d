"""Input coercion shared by the estimators."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .exceptions import InvalidArgument, ShapeMismatch
from .sigio.frames import IQFrame, SignalDataset


def check_iq_array(X, length: Optional[int] = None, dtype=np.float32) -> np.ndarray:
    """Coerce frames to a finite ``(n, 2, L)`` array.

    Accepts a ``SignalDataset``, a sequence of ``IQFrame``, a real
    ``(n, 2, L)`` array or a complex ``(n, L)`` array.
    """
    if isinstance(X, SignalDataset):
        arr = X.as_array(dtype)
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], IQFrame):
        arr = np.stack([f.as_array() for f in X]).astype(dtype)
    else:
        arr = np.asarray(X)
        if np.iscomplexobj(arr):
            if arr.ndim != 2:
                raise ShapeMismatch(f"complex input must be (n, L), got shape {arr.shape}")
            arr = np.stack([arr.real, arr.imag], axis=1)
        arr = arr.astype(dtype, copy=False)
    if arr.ndim != 3 or arr.shape[1] != 2:
        raise ShapeMismatch(f"expected frames shaped (n, 2, L), got {arr.shape}")
    if arr.shape[0] < 1:
        raise InvalidArgument("need at least one frame")
    if length is not None and arr.shape[2] != length:
        raise ShapeMismatch(f"frames have {arr.shape[2]} samples, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("frames contain NaN or infinite samples")
    return arr


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise ShapeMismatch(f"expected {n} labels, got shape {y.shape}")
    return y


def to_dataset(X: np.ndarray, y=None, class_names=None, split_tag: str = "train",
               description: Optional[str] = None) -> SignalDataset:
    """Wrap an ``(n, 2, L)`` array and optional integer labels as a dataset."""
    labels = [None] * len(X) if y is None else [int(v) for v in y]
    frames = [IQFrame(x[0], x[1], label=lab) for x, lab in zip(X, labels)]
    if class_names is None:
        class_names = [str(k) for k in range(max(labels) + 1)] if y is not None else []
    manifest = {"description": description} if description else {}
    return SignalDataset(frames, list(class_names), split_tag, manifest)
