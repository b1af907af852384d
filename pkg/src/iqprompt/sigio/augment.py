"""Label-preserving augmentations and power normalization."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import DegenerateSignal, InvalidArgument, InvalidWarp
from .frames import IQFrame


def augment_phase_rotate(frame: IQFrame, theta: float) -> IQFrame:
    """Multiply the complex baseband signal by ``exp(j*theta)``."""
    if not math.isfinite(theta):
        raise InvalidArgument("theta must be finite")
    c, s = math.cos(theta), math.sin(theta)
    i, q = frame.i, frame.q
    return frame.with_samples(i * c - q * s, i * s + q * c)


def augment_reverse(frame: IQFrame) -> IQFrame:
    return frame.with_samples(frame.i[::-1].copy(), frame.q[::-1].copy())


def warp_function(knots, n: int) -> np.ndarray:
    """Evaluate the piecewise-linear warp through ``knots`` at ``0..n-1``."""
    knots = np.asarray(knots, dtype=np.float64)
    if knots.ndim != 2 or knots.shape[1] != 2 or knots.shape[0] < 2:
        raise InvalidWarp("knots must be a list of at least two (t, phi) pairs")
    t, phi = knots[:, 0], knots[:, 1]
    if not (np.all(np.diff(t) > 0) and np.all(np.diff(phi) > 0)):
        raise InvalidWarp("warp knots must be strictly increasing in t and phi")
    if t[0] != 0 or phi[0] != 0 or t[-1] != n - 1 or phi[-1] != n - 1:
        raise InvalidWarp(f"warp endpoints must map 0->0 and {n - 1}->{n - 1}")
    return np.interp(np.arange(n, dtype=np.float64), t, phi)


def augment_time_warp(frame: IQFrame, knots) -> IQFrame:
    """Resample ``frame`` at monotone positions ``phi(n)`` by linear interpolation."""
    n = len(frame)
    if n < 2:
        raise InvalidWarp("time warp needs at least two samples")
    pos = warp_function(knots, n)
    grid = np.arange(n, dtype=np.float64)
    return frame.with_samples(np.interp(pos, grid, frame.i), np.interp(pos, grid, frame.q))


def random_warp_knots(n: int, rng: np.random.Generator, n_knots: int = 4, strength: float = 0.2):
    """Sample valid interior knots whose offsets stay within ``strength`` of the knot spacing."""
    if n < 2:
        raise InvalidArgument("time warp needs at least two samples")
    t = np.linspace(0, n - 1, n_knots + 2)
    spacing = t[1] - t[0]
    phi = t.copy()
    phi[1:-1] += rng.uniform(-strength, strength, n_knots) * spacing
    return list(zip(t.tolist(), phi.tolist()))


def normalize(frame: IQFrame) -> IQFrame:
    """Scale to unit mean per-sample power."""
    p = frame.mean_power()
    if p == 0.0:
        raise DegenerateSignal("cannot normalize an all-zero frame")
    g = 1.0 / math.sqrt(p)
    return frame.with_samples(frame.i * g, frame.q * g)
