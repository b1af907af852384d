"""Received-signal model: linear channel convolution plus calibrated AWGN."""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeMismatch
from .frames import NOISELESS, ChannelSpec, IQFrame


def apply_channel(frame: IQFrame, chan: ChannelSpec) -> IQFrame:
    """Convolve with ``chan.taps`` (output truncated to the input length) and add noise.

    Noise power is set from the measured post-convolution signal power so the
    received SNR matches ``chan.snr_db``.
    """
    z = frame.as_complex()
    taps = np.asarray(chan.taps, dtype=np.complex128)
    if taps.shape == (1,) and taps[0] == 1:
        y = z
    else:
        y = np.convolve(z, taps)[: z.shape[0]]
    if not chan.noiseless:
        p_sig = np.mean(np.abs(y) ** 2)
        p_noise = p_sig / 10.0 ** (chan.snr_db / 10.0)
        rng = np.random.default_rng(chan.seed)
        noise = rng.standard_normal((2, z.shape[0])) * np.sqrt(p_noise / 2.0)
        y = y + (noise[0] + 1j * noise[1])
    if y is z:
        return frame.with_samples(frame.i.copy(), frame.q.copy())
    out = IQFrame.from_complex(y, label=frame.label, scheme=frame.scheme, snr_db=chan.snr_db)
    return out


def add_awgn(frame: IQFrame, snr_db: float, seed: int) -> IQFrame:
    return apply_channel(frame, ChannelSpec(snr_db=snr_db, seed=seed))


def estimate_snr(clean: IQFrame, noisy: IQFrame) -> float:
    """Power ratio of ``clean`` to the residual ``noisy - clean`` in dB.

    Returns ``NOISELESS`` when the residual is exactly zero.
    """
    if len(clean) != len(noisy):
        raise ShapeMismatch(f"clean has {len(clean)} samples, noisy has {len(noisy)}")
    c = clean.as_complex()
    r = noisy.as_complex() - c
    p_res = float(np.sum(np.abs(r) ** 2))
    if p_res == 0.0:
        return NOISELESS
    return float(10.0 * np.log10(np.sum(np.abs(c) ** 2) / p_res))
