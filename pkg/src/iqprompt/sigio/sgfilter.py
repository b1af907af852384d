"""Savitzky-Golay smoothing, the classical denoising baseline."""

from __future__ import annotations

from scipy.signal import savgol_filter

from ..exceptions import InvalidArgument
from .frames import IQFrame

EDGE_MODES = ("interp", "mirror", "nearest", "wrap")


def sg_filter(frame: IQFrame, window: int = 5, polyorder: int = 2, mode: str = "interp") -> IQFrame:
    """Replace each sample by the center value of a local least-squares polynomial fit.

    ``mode="interp"`` fits the first and last full windows for the edge
    samples, so polynomials of degree <= ``polyorder`` pass through unchanged
    everywhere. ``"mirror"`` pads by reflection about the edge samples.
    """
    if window < 1 or window % 2 != 1:
        raise InvalidArgument(f"window must be a positive odd count, got {window}")
    if not 0 <= polyorder < window:
        raise InvalidArgument(f"polyorder must lie in [0, window), got {polyorder}")
    if window > len(frame):
        raise InvalidArgument(f"window {window} exceeds frame length {len(frame)}")
    if mode not in EDGE_MODES:
        raise InvalidArgument(f"mode must be one of {EDGE_MODES}")
    i = savgol_filter(frame.i.astype(float), window, polyorder, mode=mode)
    q = savgol_filter(frame.q.astype(float), window, polyorder, mode=mode)
    return frame.with_samples(i, q)
