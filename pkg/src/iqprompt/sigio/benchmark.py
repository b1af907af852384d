"""Synthetic labelled benchmark corpus with deterministic 8:1:1 splits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..exceptions import InvalidArgument, UnsupportedScheme
from .channel import apply_channel
from .frames import NOISELESS, ChannelSpec, IQFrame, SignalDataset, is_noiseless
from .modulation import SCHEMES, generate_modulated

FORMAT_VERSION = "1"


@dataclass
class GeneratorConfig:
    """Keys of the ``data`` config section."""

    schemes: list = field(default_factory=lambda: ["BPSK", "QPSK", "PAM4", "QAM16"])
    snr_grid_db: list = field(default_factory=lambda: [18.0])
    frames_per_cell: int = 100
    length: int = 128
    sps: int = 8
    seed: int = 0
    pulse: str = "rect"
    rolloff: float = 0.35
    taps: Optional[list] = None
    name: str = "synthetic"
    description: str = (
        "Synthetic baseband IQ recordings of digitally modulated signals "
        "with rectangular pulses received over an AWGN channel."
    )

    def validate(self):
        if not self.schemes:
            raise InvalidArgument("generator config lists no schemes")
        for s in self.schemes:
            if s not in SCHEMES:
                raise UnsupportedScheme(f"unknown modulation scheme {s!r}")
        if not self.snr_grid_db:
            raise InvalidArgument("snr_grid_db is empty")
        if self.frames_per_cell < 1 or self.length < 1 or self.sps < 1:
            raise InvalidArgument("frames_per_cell, length and sps must be >= 1")

    def channel_taps(self):
        if not self.taps:
            return (1.0 + 0j,)
        return tuple(complex(t[0], t[1]) if isinstance(t, (list, tuple)) else complex(t) for t in self.taps)

    def snr_values(self):
        return [NOISELESS if is_noiseless(s) else float(s) for s in self.snr_grid_db]


def derive_seed(*entropy) -> int:
    """Counter-based 63-bit seed from integer entropy words."""
    ss = np.random.SeedSequence([int(e) & 0xFFFFFFFF for e in entropy])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def split_counts(n: int):
    """Per-cell (train, val, test) counts in 8:1:1 proportion."""
    n_val = n // 10
    n_test = n // 10
    return n - n_val - n_test, n_val, n_test


def _frame(cfg: GeneratorConfig, scheme_idx: int, snr_idx: int, k: int, snr: float) -> IQFrame:
    scheme = cfg.schemes[scheme_idx]
    n_sym = math.ceil(cfg.length / cfg.sps)
    clean = generate_modulated(
        scheme, n_sym, cfg.sps, derive_seed(cfg.seed, scheme_idx, snr_idx, k, 0),
        pulse=cfg.pulse, rolloff=cfg.rolloff,
    )
    clean = clean.with_samples(clean.i[: cfg.length], clean.q[: cfg.length])
    chan = ChannelSpec(cfg.channel_taps(), snr, derive_seed(cfg.seed, scheme_idx, snr_idx, k, 1))
    rx = apply_channel(clean, chan)
    return IQFrame(
        rx.i.astype(np.float32), rx.q.astype(np.float32),
        label=scheme_idx, snr_db=snr, scheme=scheme,
    )


def make_synthetic_benchmark(config: GeneratorConfig, seed: Optional[int] = None):
    """Generate balanced ``(train, val, test)`` datasets from ``config``.

    Every (scheme, SNR) cell contributes ``frames_per_cell`` frames, split
    8:1:1 by a seeded permutation. Each frame draws from its own derived
    seed, so regeneration is bit-identical.
    """
    if seed is not None:
        config = GeneratorConfig(**{**asdict(config), "seed": int(seed)})
    config.validate()
    snrs = config.snr_values()
    parts = {"train": [], "val": [], "test": []}
    for si in range(len(config.schemes)):
        for ni, snr in enumerate(snrs):
            frames = [_frame(config, si, ni, k, snr) for k in range(config.frames_per_cell)]
            order = np.random.default_rng(derive_seed(config.seed, si, ni, 0xC0FFEE)).permutation(len(frames))
            n_train, n_val, _ = split_counts(len(frames))
            parts["train"] += [frames[k] for k in order[:n_train]]
            parts["val"] += [frames[k] for k in order[n_train: n_train + n_val]]
            parts["test"] += [frames[k] for k in order[n_train + n_val:]]
    manifest = {
        "format_version": FORMAT_VERSION,
        "generator": asdict(config),
        "seed": config.seed,
        "description": config.description,
        "name": config.name,
    }
    return tuple(
        SignalDataset(parts[tag], list(config.schemes), tag, {**manifest, "split": tag})
        for tag in ("train", "val", "test")
    )
