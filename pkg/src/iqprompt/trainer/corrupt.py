"""Pretext-task corruptions: AWGN at a sampled SNR, and contiguous patch masking."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidArgument
from ..sigio.channel import add_awgn
from ..sigio.frames import IQFrame


def corrupt_awgn(x: np.ndarray, snrs, seeds) -> np.ndarray:
    """Add white Gaussian noise to each ``(2, L)`` row of ``x`` at its own SNR and seed."""
    out = np.empty_like(x)
    for k, (snr, seed) in enumerate(zip(snrs, seeds)):
        noisy = add_awgn(IQFrame(x[k, 0], x[k, 1]), float(snr), int(seed))
        out[k] = noisy.as_array()
    return out


def mask_span(n_patches: int, ratio: float) -> int:
    if not 0.0 < ratio < 1.0:
        raise InvalidArgument(f"mask_ratio must lie in (0, 1), got {ratio}")
    return min(n_patches, max(1, int(round(ratio * n_patches))))


def corrupt_mask(x: np.ndarray, starts, span: int, patch_len: int, stride: int):
    """Zero ``span`` consecutive patches per frame starting at patch ``starts[k]``.

    Returns ``(masked, where)``; ``where`` is True on zeroed samples.
    """
    out = x.copy()
    where = np.zeros(x.shape, dtype=bool)
    for k, s in enumerate(starts):
        lo = int(s) * stride
        hi = (int(s) + span - 1) * stride + patch_len
        out[k, :, lo:hi] = 0.0
        where[k, :, lo:hi] = True
    return out, where
