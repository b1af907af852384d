"""Baseband modulators for the eight digital schemes used by the benchmarks."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidArgument, UnsupportedScheme
from .frames import IQFrame

SCHEMES = ("BPSK", "QPSK", "8PSK", "PAM4", "QAM16", "QAM64", "GFSK", "CPFSK")

_FSK_INDEX = 0.5
_GFSK_BT = 0.35
_GFSK_SPAN = 4


def _gray(n: int) -> np.ndarray:
    k = np.arange(n)
    return k ^ (k >> 1)


def _gray_pam_levels(bits: int) -> np.ndarray:
    """Amplitude for each symbol index so that neighbouring levels differ in one bit."""
    m = 1 << bits
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    out = np.empty(m)
    out[_gray(m)] = levels
    return out


def constellation(scheme: str) -> np.ndarray:
    """Unit-average-power constellation indexed by symbol value."""
    if scheme == "BPSK":
        return np.array([1.0 + 0j, -1.0 + 0j])
    if scheme == "QPSK":
        pts = np.array([complex(1 - 2 * (s >> 1), 1 - 2 * (s & 1)) for s in range(4)])
        return pts / np.sqrt(2.0)
    if scheme == "8PSK":
        out = np.empty(8, dtype=np.complex128)
        out[_gray(8)] = np.exp(2j * np.pi * np.arange(8) / 8)
        return out
    if scheme == "PAM4":
        return _gray_pam_levels(2) / np.sqrt(5.0) + 0j
    if scheme in ("QAM16", "QAM64"):
        bits = 2 if scheme == "QAM16" else 3
        axis = _gray_pam_levels(bits)
        m = 1 << bits
        idx = np.arange(m * m)
        pts = axis[idx >> bits] + 1j * axis[idx & (m - 1)]
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    raise UnsupportedScheme(f"{scheme!r} has no point constellation")


def order(scheme: str) -> int:
    if scheme in ("GFSK", "CPFSK"):
        return 2
    return len(constellation(scheme))


def rrc_taps(sps: int, rolloff: float = 0.35, span: int = 8) -> np.ndarray:
    """Root-raised-cosine impulse response with unit energy."""
    t = np.arange(-span * sps // 2, span * sps // 2 + 1) / sps
    h = np.empty_like(t)
    b = rolloff
    for k, tk in enumerate(t):
        if np.isclose(tk, 0.0):
            h[k] = 1.0 + b * (4 / np.pi - 1)
        elif b > 0 and np.isclose(abs(tk), 1 / (4 * b)):
            h[k] = (b / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            num = np.sin(np.pi * tk * (1 - b)) + 4 * b * tk * np.cos(np.pi * tk * (1 + b))
            h[k] = num / (np.pi * tk * (1 - (4 * b * tk) ** 2))
    return h / np.sqrt(np.sum(h * h))


def _fsk(symbols: np.ndarray, sps: int, gaussian: bool) -> np.ndarray:
    nrz = np.repeat(2.0 * symbols - 1.0, sps)
    if gaussian:
        t = np.arange(-_GFSK_SPAN * sps // 2, _GFSK_SPAN * sps // 2 + 1) / sps
        sigma = np.sqrt(np.log(2)) / (2 * np.pi * _GFSK_BT)
        g = np.exp(-(t**2) / (2 * sigma**2))
        nrz = np.convolve(nrz, g / g.sum(), mode="same")
    phase = np.pi * _FSK_INDEX * np.cumsum(nrz) / sps
    return np.exp(1j * phase)


def generate_modulated(
    scheme: str,
    num_symbols: int,
    sps: int,
    seed: int = 0,
    *,
    pulse: str = "rect",
    rolloff: float = 0.35,
    span: int = 8,
    symbols=None,
) -> IQFrame:
    """Random symbols of ``scheme`` shaped to ``num_symbols * sps`` samples.

    ``symbols`` overrides the random symbol indices. Rectangular shaping keeps
    samples on the nominal constellation; root-raised-cosine output is
    rescaled to unit mean power.
    """
    if scheme not in SCHEMES:
        raise UnsupportedScheme(f"unknown modulation scheme {scheme!r}; expected one of {SCHEMES}")
    if num_symbols < 1 or sps < 1:
        raise InvalidArgument("num_symbols and sps must both be >= 1")
    if pulse not in ("rect", "rrc"):
        raise InvalidArgument(f"pulse must be 'rect' or 'rrc', got {pulse!r}")
    m = order(scheme)
    if symbols is None:
        rng = np.random.default_rng(seed)
        symbols = rng.integers(0, m, size=num_symbols)
    else:
        symbols = np.asarray(symbols, dtype=np.int64)
        if symbols.shape != (num_symbols,) or symbols.min() < 0 or symbols.max() >= m:
            raise InvalidArgument("symbol override must hold num_symbols indices below the order")

    if scheme in ("GFSK", "CPFSK"):
        z = _fsk(symbols, sps, gaussian=scheme == "GFSK")
    else:
        points = constellation(scheme)[symbols]
        if pulse == "rect":
            z = np.repeat(points, sps)
        else:
            up = np.zeros(num_symbols * sps, dtype=np.complex128)
            up[::sps] = points
            z = np.convolve(up, rrc_taps(sps, rolloff, span), mode="same")
            z = z / np.sqrt(np.mean(np.abs(z) ** 2))
    return IQFrame.from_complex(z, scheme=scheme)
